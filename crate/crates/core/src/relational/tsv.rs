use std::io::{BufRead, Write};

use super::relation::{Database, Relation};
use crate::error::{Error, Result};

/// Writes one tuple per line, constants separated by tabs.
pub fn dump_tsv(rel: &Relation, db: &Database, out: &mut impl Write) -> Result<()> {
    for t in rel.tuples() {
        let row: Vec<&str> = t.iter().map(|&s| db.symbols.name(s)).collect();
        writeln!(out, "{}", row.join("\t")).map_err(|e| Error::Io(e.to_string()))?;
    }
    Ok(())
}

/// Reads tab-separated tuples into relation `name` of `db`.
pub fn load_tsv(db: &mut Database, name: &str, arity: usize, input: impl BufRead) -> Result<()> {
    let mut rows = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Io(e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(str::to_string).collect();
        if fields.len() != arity {
            return Err(Error::Syntax { line: n + 1, col: 1, msg: format!("expected {arity} fields, got {}", fields.len()) });
        }
        rows.push(fields);
    }
    db.load_strings(name, arity, rows.iter().map(|r| r.iter().map(String::as_str).collect()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut db = Database::new();
        db.load_strings("r", 2, vec![vec!["a b", "c"], vec!["d", "e"]]);
        let mut buf = Vec::new();
        dump_tsv(db.get("r").unwrap(), &db, &mut buf).unwrap();
        let mut db2 = Database::new();
        load_tsv(&mut db2, "r", 2, &buf[..]).unwrap();
        let mut again = Vec::new();
        dump_tsv(db2.get("r").unwrap(), &db2, &mut again).unwrap();
        let mut a: Vec<&str> = std::str::from_utf8(&buf).unwrap().lines().collect();
        let mut b: Vec<&str> = std::str::from_utf8(&again).unwrap().lines().collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert!(load_tsv(&mut db2, "s", 3, "x\ty\n".as_bytes()).is_err());
    }
}
