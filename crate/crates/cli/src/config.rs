//! Flat `key = value` run files. Keys are long flag names without the
//! leading dashes; `command` names the subcommand. Values from the file are
//! injected ahead of the command-line flags so the latter take precedence.

use std::path::Path;

use anyhow::{bail, Context};
use serde_json::{Map, Value};

pub const COMMANDS: [&str; 4] = ["coeffs", "fpe", "sde", "validate"];

/// Global flags that take a value.
const VALUED_GLOBALS: [&str; 2] = ["--config", "--threads"];

pub fn parse(text: &str) -> anyhow::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key = value, got {line:?}", n + 1);
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Flattens an effective configuration into run-file text. `null` and
/// `false` entries are omitted since they match the flag being absent.
pub fn render(command: &str, options: &Map<String, Value>) -> String {
    let mut s = format!("command = {command}\n");
    for (k, v) in options {
        let text = match v {
            Value::Null | Value::Bool(false) => continue,
            Value::String(x) => x.clone(),
            other => other.to_string(),
        };
        s.push_str(&format!("{k} = {text}\n"));
    }
    s
}

fn config_path(args: &[String]) -> anyhow::Result<Option<String>> {
    for (i, a) in args.iter().enumerate() {
        if let Some(p) = a.strip_prefix("--config=") {
            return Ok(Some(p.to_string()));
        }
        if a == "--config" {
            return match args.get(i + 1) {
                Some(p) => Ok(Some(p.clone())),
                None => bail!("--config needs a file path"),
            };
        }
    }
    Ok(None)
}

fn command_index(args: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let a = args[i].as_str();
        if VALUED_GLOBALS.contains(&a) {
            i += 2;
            continue;
        }
        if COMMANDS.contains(&a) {
            return Some(i);
        }
        i += 1;
    }
    None
}

/// Merges the file named by `--config` into the argument list.
pub fn expand(args: Vec<String>) -> anyhow::Result<Vec<String>> {
    let Some(path) = config_path(&args)? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path)).with_context(|| format!("reading config {path}"))?;
    let mut command = None;
    let mut injected = Vec::new();
    for (k, v) in parse(&text)? {
        match (k.as_str(), v.as_str()) {
            ("command", c) => command = Some(c.to_string()),
            (_, "false") => {}
            (_, "true") => injected.push(format!("--{k}")),
            _ => injected.push(format!("--{k}={v}")),
        }
    }
    let mut args = args;
    match command_index(&args) {
        Some(i) => {
            args.splice(i + 1..i + 1, injected);
        }
        None => {
            let Some(c) = command else {
                bail!("no subcommand given and config {path} has no `command` key");
            };
            injected.insert(0, c);
            args.splice(1..1, injected);
        }
    }
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &[&str]) -> Vec<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn parse_and_render() {
        let mut m = Map::new();
        m.insert("gamma".into(), Value::from(0.1));
        m.insert("q0".into(), Value::from(-1.5));
        m.insert("quantum".into(), Value::Bool(false));
        m.insert("compare-analytic".into(), Value::Bool(true));
        m.insert("hbar".into(), Value::Null);
        m.insert("form".into(), Value::from("adelman"));
        let text = render("fpe", &m);
        let kv = parse(&format!("# sweep\n\n{text}")).unwrap();
        assert_eq!(
            kv,
            vec![
                ("command".to_string(), "fpe".to_string()),
                ("compare-analytic".into(), "true".into()),
                ("form".into(), "adelman".into()),
                ("gamma".into(), "0.1".into()),
                ("q0".into(), "-1.5".into()),
            ]
        );
        assert!(parse("gamma 1").is_err());
    }

    #[test]
    fn injection_precedes_flags() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("run.conf");
        std::fs::write(&f, "command = sde\nseed = 3\nq0 = -1\nraw = true\n").unwrap();
        let path = f.to_str().unwrap();
        let a = expand(v(&["qbm", "--config", path, "sde", "--seed", "9"])).unwrap();
        assert_eq!(a[3..], v(&["sde", "--seed=3", "--q0=-1", "--raw", "--seed", "9"]));
        let b = expand(v(&["qbm", "--threads", "2", "--config", path])).unwrap();
        assert_eq!(b[1..5], v(&["sde", "--seed=3", "--q0=-1", "--raw"]));
        assert_eq!(expand(v(&["qbm", "fpe"])).unwrap(), v(&["qbm", "fpe"]));
    }
}
