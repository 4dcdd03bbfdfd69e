use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::Command;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn meta(cmd: Command, cfg: &RunConfig) -> Value {
    json!({
        "tool": "pmresp",
        "version": VERSION,
        "command": cmd.name(),
        "config": cfg,
    })
}

fn open(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

/// CSV preceded by a `#` block echoing the tool version and configuration.
pub fn write_csv(
    cmd: Command,
    cfg: &RunConfig,
    name: &str,
    body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<PathBuf> {
    let p = path(cfg, name);
    let mut w = open(&p)?;
    writeln!(w, "# pmresp {VERSION}")?;
    writeln!(w, "# command: {}", cmd.name())?;
    writeln!(w, "# config: {}", serde_json::to_string(cfg)?)?;
    body(&mut w)?;
    w.flush()?;
    log::info!("wrote {}", p.display());
    Ok(p)
}

/// JSON object `{"meta": ..., <payload fields>}`.
pub fn write_json(cmd: Command, cfg: &RunConfig, name: &str, payload: &impl Serialize) -> Result<PathBuf> {
    let mut obj = serde_json::Map::new();
    obj.insert("meta".into(), meta(cmd, cfg));
    match serde_json::to_value(payload)? {
        Value::Object(m) => obj.extend(m),
        other => {
            obj.insert("result".into(), other);
        }
    }
    let p = path(cfg, name);
    let mut w = open(&p)?;
    serde_json::to_writer_pretty(&mut w, &Value::Object(obj))?;
    writeln!(w)?;
    w.flush()?;
    log::info!("wrote {}", p.display());
    Ok(p)
}
