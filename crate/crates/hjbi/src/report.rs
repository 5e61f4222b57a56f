//! Flat `key = value` reports and atomic artifact writes.

use crate::config::RunConfig;
use crate::fieldio::fmt_f64;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// An ordered list of `key = value` lines. Keys starting with `verdict.`
/// decide the exit status.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Report {
        Report::default()
    }

    pub fn text(&mut self, key: impl Into<String>, value: impl std::fmt::Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn num(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.entries.push((key.into(), fmt_f64(value)));
        self
    }

    pub fn list(&mut self, key: impl Into<String>, values: &[f64]) -> &mut Self {
        let joined: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
        self.entries.push((key.into(), joined.join(";")));
        self
    }

    pub fn verdict(&mut self, name: &str, ok: bool) -> &mut Self {
        self.entries.push((format!("verdict.{name}"), ok.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn verdicts(&self) -> impl Iterator<Item = (&str, bool)> {
        self.entries
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("verdict.").map(|name| (name, v == "true")))
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts().all(|(_, ok)| ok)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.verdicts().filter(|(_, ok)| !ok).map(|(k, _)| k).collect()
    }

    /// Header (tool version, command, config hash, effective config as
    /// comments) followed by the entries.
    pub fn render(&self, command: &str, config: &RunConfig) -> String {
        let mut out = String::new();
        writeln!(out, "# hjbi {}", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(out, "# command = {command}").unwrap();
        writeln!(out, "# config_sha256 = {}", config.hash()).unwrap();
        for line in config.canonical().lines() {
            if line.is_empty() {
                out.push_str("#\n");
            } else {
                writeln!(out, "#   {line}").unwrap();
            }
        }
        out.push_str(&self.body());
        out
    }

    /// The `key = value` lines without the header.
    pub fn body(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Overrides;

    #[test]
    fn verdicts_drive_status() {
        let mut r = Report::new();
        r.num("x", 0.1).verdict("a", true).list("l", &[1.0, 2.5]);
        assert!(r.all_pass());
        assert_eq!(r.get("l"), Some("1.0;2.5"));
        r.verdict("b", false);
        assert_eq!(r.failed(), ["b"]);
        let cfg = RunConfig::from_toml("", &Overrides::default()).unwrap();
        let text = r.render("solve", &cfg);
        assert!(text.starts_with("# hjbi "));
        assert!(text.contains(&format!("# config_sha256 = {}", cfg.hash())));
        assert!(text.ends_with("verdict.b = false\n"));
    }

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("a.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        let names: Vec<_> = std::fs::read_dir(path.parent().unwrap()).unwrap().collect();
        assert_eq!(names.len(), 1);
    }
}
