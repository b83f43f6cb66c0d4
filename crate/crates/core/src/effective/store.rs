//! JSON-lines persistence of [`EnergyRecord`]s.

use super::EnergyRecord;
use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

pub fn append_records(path: &Path, records: &[EnergyRecord]) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut buf = String::new();
    for r in records {
        buf.push_str(&serde_json::to_string(r).map_err(io::Error::other)?);
        buf.push('\n');
    }
    f.write_all(buf.as_bytes())
}

/// All records of a file; a missing file reads as empty.
pub fn read_records(path: &Path) -> io::Result<Vec<EnergyRecord>> {
    let f = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/records.jsonl");
        assert!(read_records(&path).unwrap().is_empty());
        let a = crate::effective::oned_star_record(0.8).unwrap();
        let mut b = a.clone();
        b.config_hash = "abc".into();
        append_records(&path, std::slice::from_ref(&a)).unwrap();
        append_records(&path, &[b.clone()]).unwrap();
        assert_eq!(read_records(&path).unwrap(), vec![a, b]);
    }
}
