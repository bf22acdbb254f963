#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};

pub struct RunResult {
    pub code: i32,
    pub stderr: String,
    pub out: PathBuf,
}

impl RunResult {
    pub fn read(&self, file: &str) -> String {
        std::fs::read_to_string(self.out.join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
    }

    pub fn json(&self, file: &str) -> Value {
        serde_json::from_str(&self.read(file)).unwrap()
    }
}

/// Runs the binary with `config` written to `dir/<name>.json` and outputs in `dir/<name>`.
pub fn run(dir: &Path, name: &str, command: &str, config: &Value, extra: &[&str]) -> RunResult {
    let cfg = dir.join(format!("{name}.json"));
    std::fs::write(&cfg, serde_json::to_string_pretty(config).unwrap()).unwrap();
    run_file(dir, name, command, &cfg, extra)
}

pub fn run_file(dir: &Path, name: &str, command: &str, cfg: &Path, extra: &[&str]) -> RunResult {
    let out = dir.join(name);
    let o = Command::new(env!("CARGO_BIN_EXE_porohom"))
        .arg(command)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .expect("binary runs");
    RunResult { code: o.status.code().unwrap_or(-1), stderr: String::from_utf8_lossy(&o.stderr).into_owned(), out }
}

pub fn identity() -> Value {
    json!({"constant": {"matrix": [[1.0, 0.0], [0.0, 1.0]]}})
}

pub fn scalar(v: f64) -> Value {
    json!({"constant": {"matrix": [[v, 0.0], [0.0, v]]}})
}

pub fn disc(r: f64) -> Value {
    json!({"disc": {"center": [0.5, 0.5], "radius": r}})
}

pub fn mode() -> Value {
    json!({"mode": {"amplitude": 1.0}})
}

/// The ε-sweep used for the boundary-gap and micro-to-macro checks.
pub fn sweep_config(scaling: &str, epsilons: &[f64], h_ref: f64, h_macro: f64, dt: f64, t_end: f64) -> Value {
    json!({
        "sweep": {
            "inclusion": disc(0.25),
            "diffusion": [identity(), scalar(2.0), identity()],
            "kinetics": "langmuir:a=1,b=1",
            "initial": [mode(), mode(), mode()],
            "scaling": scaling,
            "epsilons": epsilons,
            "dt": dt,
            "t_end": t_end,
            "h_ref": h_ref,
            "h_macro": h_macro,
            "table_s_max": 2.0,
            "table_points": 9
        }
    })
}

/// Every file in `a` exists in `b` with the same bytes.
pub fn same_outputs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut n = 0;
    for entry in std::fs::read_dir(a).map_err(|e| e.to_string())? {
        let p = entry.map_err(|e| e.to_string())?.path();
        let name = p.file_name().unwrap();
        let x = std::fs::read(&p).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(name)).map_err(|e| format!("{}: {e}", name.to_string_lossy()))?;
        if x != y {
            return Err(format!("{} differs", name.to_string_lossy()));
        }
        n += 1;
    }
    Ok(n)
}
