//! Energy peaks of two speed profiles, the second a delayed copy of the first.

use lf_forge::wavecorr::{cwt_energy, peak_match, WaveletConfig};

fn profile(delay: f64, dt: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let t = k as f64 * dt - delay;
            12.0 + 2.0 * (-(t - 15.0).powi(2) / 4.0).exp() - 1.5 * (-(t - 30.0).powi(2) / 6.0).exp()
        })
        .collect()
}

fn main() {
    let (dt, n) = (0.5, 100);
    let cfg = WaveletConfig::default();
    let lv = cwt_energy(&profile(0.0, dt, n), 0.0, dt, &cfg).unwrap();
    println!("LV peaks at {:?}", lv.peak_times());
    for delay in [1.0, 4.0] {
        let sv = cwt_energy(&profile(delay, dt, n), 0.0, dt, &cfg).unwrap();
        let m = peak_match(&lv, &sv, &cfg);
        println!(
            "delay {delay} s: SV peaks at {:?}, matched = {} ({:?})",
            sv.peak_times(),
            m.matched,
            m.pairs
        );
    }
}
