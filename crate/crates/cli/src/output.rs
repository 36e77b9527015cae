use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hcoarea::io::{create, fmt17, write_json};
use serde::Serialize;

/// Optional artifact directory; created on first use.
pub struct Artifacts {
    dir: Option<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: Option<&Path>) -> Result<Artifacts> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d).with_context(|| format!("cannot create output directory {}", d.display()))?;
        }
        Ok(Artifacts { dir: dir.map(Path::to_path_buf) })
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            write_json(&path, value).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        Ok(())
    }

    pub fn file(&self, name: &str, write: impl FnOnce(std::io::BufWriter<std::fs::File>) -> hcoarea::Result<()>) -> Result<()> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            write(create(&path)?).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        Ok(())
    }
}

pub fn num(key: &str, v: f64) {
    println!("{key}: {}", fmt17(v));
}

pub fn opt(key: &str, v: Option<f64>) {
    match v {
        Some(x) => num(key, x),
        None => println!("{key}: none"),
    }
}
