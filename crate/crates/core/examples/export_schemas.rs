//! Writes the JSON schemas of the run config, pair dossier and review
//! decisions into a directory (default `docs/`).

use std::path::PathBuf;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "docs".into()));
    std::fs::create_dir_all(&dir)?;
    for (name, schema) in lf_forge::app::schemas() {
        std::fs::write(dir.join(name), lf_forge::app::schema_text(&schema))?;
        println!("{}", dir.join(name).display());
    }
    Ok(())
}
