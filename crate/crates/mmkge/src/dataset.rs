//! Directory layout: `entities.dict`, `relations.dict` (`<id>\t<name>`) and
//! `train.txt`, `valid.txt`, `test.txt` (`<head>\t<relation>\t<tail>`).

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mmkge_core::{KnowledgeGraph, Split, Triple};

use crate::error::{Error, Result};

pub const ENTITIES: &str = "entities.dict";
pub const RELATIONS: &str = "relations.dict";

pub fn split_file(split: Split) -> &'static str {
    match split {
        Split::Train => "train.txt",
        Split::Valid => "valid.txt",
        Split::Test => "test.txt",
    }
}

/// Every file `load_graph` reads, in a fixed order.
pub fn dataset_files(dir: &Path) -> Vec<PathBuf> {
    let mut files = vec![dir.join(ENTITIES), dir.join(RELATIONS)];
    files.extend([Split::Train, Split::Valid, Split::Test].map(|s| dir.join(split_file(s))));
    files
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Malformed { path: path.to_path_buf(), line, message: message.into() }
}

fn load_dict(path: &Path, kind: &'static str) -> Result<Vec<String>> {
    let text = read(path)?;
    let mut entries: Vec<(u64, usize, String)> = Vec::new();
    let mut names = HashSet::new();
    for (line, l) in lines(&text) {
        let (id, name) = l.split_once('\t').ok_or_else(|| malformed(path, line, "expected `<id>\\t<name>`"))?;
        let id: u64 = id.trim().parse().map_err(|_| malformed(path, line, format!("invalid {kind} id {id:?}")))?;
        if !names.insert(name.to_string()) {
            return Err(Error::DuplicateEntry { path: path.to_path_buf(), line, entry: name.to_string() });
        }
        entries.push((id, line, name.to_string()));
    }
    let count = entries.len();
    let mut slots: Vec<Option<String>> = vec![None; count];
    for (id, line, name) in entries {
        if id >= count as u64 {
            return Err(Error::IdOutOfRange { path: path.to_path_buf(), line, kind, id, count });
        }
        let slot = &mut slots[id as usize];
        if slot.is_some() {
            return Err(Error::DuplicateEntry { path: path.to_path_buf(), line, entry: id.to_string() });
        }
        *slot = Some(name);
    }
    // `count` distinct ids below `count` leave no gaps.
    Ok(slots.into_iter().map(Option::unwrap).collect())
}

fn load_triples(path: &Path, n_e: usize, n_r: usize) -> Result<Vec<Triple>> {
    let text = read(path)?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (line, l) in lines(&text) {
        let fields: Vec<&str> = l.split('\t').collect();
        if fields.len() != 3 {
            return Err(malformed(path, line, format!("expected 3 tab-separated ids, found {}", fields.len())));
        }
        let mut ids = [0u32; 3];
        for (slot, (field, (kind, count))) in
            ids.iter_mut().zip(fields.iter().zip([("entity", n_e), ("relation", n_r), ("entity", n_e)]))
        {
            let id: u64 =
                field.trim().parse().map_err(|_| malformed(path, line, format!("invalid {kind} id {field:?}")))?;
            if id >= count as u64 {
                return Err(Error::IdOutOfRange { path: path.to_path_buf(), line, kind, id, count });
            }
            *slot = id as u32;
        }
        let t = Triple::new(ids[0], ids[1], ids[2]);
        if !seen.insert(t) {
            return Err(Error::DuplicateTriple { path: path.to_path_buf(), line, triple: t.to_string() });
        }
        out.push(t);
    }
    Ok(out)
}

pub fn load_graph(dir: &Path) -> Result<KnowledgeGraph> {
    let entities = load_dict(&dir.join(ENTITIES), "entity")?;
    let relations = load_dict(&dir.join(RELATIONS), "relation")?;
    let (n_e, n_r) = (entities.len(), relations.len());
    let [train, valid, test] =
        [Split::Train, Split::Valid, Split::Test].map(|s| load_triples(&dir.join(split_file(s)), n_e, n_r));
    Ok(KnowledgeGraph::new(entities, relations, train?, valid?, test?)?)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_graph(dir: &Path, graph: &KnowledgeGraph) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (file, names) in [(ENTITIES, graph.entity_names()), (RELATIONS, graph.relation_names())] {
        let mut s = String::new();
        for (i, n) in names.iter().enumerate() {
            writeln!(s, "{i}\t{n}").unwrap();
        }
        write(&dir.join(file), &s)?;
    }
    for split in [Split::Train, Split::Valid, Split::Test] {
        let mut s = String::new();
        for t in graph.split(split) {
            writeln!(s, "{}\t{}\t{}", t.head, t.relation, t.tail).unwrap();
        }
        write(&dir.join(split_file(split)), &s)?;
    }
    Ok(())
}
