//! Line-delimited JSON reading and writing.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{Error, Result};

/// Writes one compact JSON object per line, each terminated by `\n`.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_lines(&mut out, items).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn to_jsonl_string<T: Serialize>(items: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item)?;
        buf.push(b'\n');
    }
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

fn write_lines<T: Serialize, W: Write>(out: &mut W, items: &[T]) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut *out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Appends a single item, creating the file when needed.
pub fn append_jsonl<T: Serialize>(path: impl AsRef<Path>, item: &T) -> Result<()> {
    let path = path.as_ref();
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut line = serde_json::to_vec(item)?;
    line.push(b'\n');
    file.write_all(&line).map_err(|e| Error::io(path, e))
}

/// Reads every non-blank line. Errors carry the 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    from_reader(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn from_reader<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>> {
    let mut items = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|source| Error::JsonlLine { line: idx + 1, source })?;
        items.push(item);
    }
    Ok(items)
}

pub fn from_str<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    from_reader(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CorpusRecord;
    use crate::labels::DatasetId;

    #[test]
    fn empty_list_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.jsonl");
        write_jsonl::<CorpusRecord>(&p, &[]).unwrap();
        assert_eq!(std::fs::read(&p).unwrap().len(), 0);
        let back: Vec<CorpusRecord> = read_jsonl(&p).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn three_records() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        let recs: Vec<CorpusRecord> = (0..3)
            .map(|i| {
                let mut r = CorpusRecord::new(format!("r{i}"), DatasetId::Iam);
                r.topic = Some(format!("topic {i}"));
                r
            })
            .collect();
        write_jsonl(&p, &recs).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 3);
        let back: Vec<CorpusRecord> = read_jsonl(&p).unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn truncated_line_reports_its_number() {
        let text = "{\"id\":\"a\",\"dataset\":\"iam\"}\n{\"id\":\"b\",\"data\n";
        match from_str::<CorpusRecord>(text) {
            Err(Error::JsonlLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn append_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.jsonl");
        append_jsonl(&p, &1u32).unwrap();
        append_jsonl(&p, &2u32).unwrap();
        assert_eq!(read_jsonl::<u32>(&p).unwrap(), vec![1, 2]);
    }
}
