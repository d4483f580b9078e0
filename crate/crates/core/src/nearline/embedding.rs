use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use dashmap::DashMap;

use super::NearlineError;
use crate::graph::{parse_csv_f32, push_csv, NodeRef};
use crate::rng::splitmix64;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord<T> {
    pub node: NodeRef,
    pub vector: Vec<T>,
    /// Strictly increasing per node, starting at 1.
    pub version: u64,
    /// Epoch milliseconds (pipeline clock).
    pub produced_at: i64,
    pub model_id: u64,
}

/// Versioned key-value store of embeddings.
///
/// Records are immutable and swapped whole under the key's lock, so a
/// reader sees either the previous or the next record of a node.
#[derive(Debug, Default)]
pub struct EmbeddingStore<T> {
    map: DashMap<NodeRef, Arc<EmbeddingRecord<T>>>,
    audit: Option<Mutex<Vec<(NodeRef, u64)>>>,
}

impl<T: Scalar> EmbeddingStore<T> {
    pub fn new() -> Self {
        Self {
            map: DashMap::new(),
            audit: None,
        }
    }

    /// A store that also logs every `(node, version)` it publishes.
    pub fn with_audit() -> Self {
        Self {
            map: DashMap::new(),
            audit: Some(Mutex::new(Vec::new())),
        }
    }

    pub fn audit_log(&self) -> Vec<(NodeRef, u64)> {
        self.audit
            .as_ref()
            .map(|a| a.lock().expect("audit lock").clone())
            .unwrap_or_default()
    }

    /// Writes a new version of `node`'s embedding.
    pub fn publish(&self, node: NodeRef, vector: Vec<T>, produced_at: i64, model_id: u64) -> Arc<EmbeddingRecord<T>> {
        let mut entry = self.map.entry(node).or_insert_with(|| {
            Arc::new(EmbeddingRecord {
                node,
                vector: Vec::new(),
                version: 0,
                produced_at: i64::MIN,
                model_id,
            })
        });
        let rec = Arc::new(EmbeddingRecord {
            node,
            vector,
            version: entry.version + 1,
            produced_at,
            model_id,
        });
        *entry = Arc::clone(&rec);
        if let Some(a) = &self.audit {
            a.lock().expect("audit lock").push((node, rec.version));
        }
        rec
    }

    /// Inserts a record as is (loading an export). Keeps the higher version.
    pub fn insert(&self, record: EmbeddingRecord<T>) {
        let node = record.node;
        self.map
            .entry(node)
            .and_modify(|r| {
                if record.version > r.version {
                    *r = Arc::new(record.clone());
                }
            })
            .or_insert_with(|| Arc::new(record));
    }

    pub fn get(&self, node: NodeRef) -> Option<Arc<EmbeddingRecord<T>>> {
        self.map.get(&node).map(|r| Arc::clone(&r))
    }

    pub fn remove(&self, node: NodeRef) -> bool {
        self.map.remove(&node).is_some()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn nodes(&self) -> Vec<NodeRef> {
        let mut v: Vec<_> = self.map.iter().map(|e| *e.key()).collect();
        v.sort_unstable();
        v
    }

    /// Records sorted by node.
    pub fn records(&self) -> Vec<Arc<EmbeddingRecord<T>>> {
        self.nodes().into_iter().filter_map(|n| self.get(n)).collect()
    }

    /// Order-independent digest of nodes, versions and vector bits.
    pub fn checksum(&self) -> u64 {
        let mut h = 0u64;
        for r in self.records() {
            let mut x = splitmix64(((r.node.node_type.index() as u64) << 56) ^ r.node.id);
            x = splitmix64(x ^ r.version);
            for v in &r.vector {
                x = splitmix64(x ^ v.as_f64().to_bits());
            }
            h = splitmix64(h ^ x);
        }
        h
    }

    /// `<type>:<id> TAB <version> TAB <csv>` lines, sorted by node.
    pub fn export_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let mut line = String::new();
        for r in self.records() {
            line.clear();
            line.push_str(&format!("{}\t{}\t", r.node, r.version));
            push_csv(&mut line, &r.vector);
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<(), NearlineError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.export_to(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

impl EmbeddingStore<f32> {
    /// Parses an export. `model_id` and `produced_at` are not part of the
    /// format and come back as 0.
    pub fn import_from(r: impl BufRead) -> Result<Self, NearlineError> {
        let store = Self::new();
        let mut dim = None;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: String| NearlineError::Parse { line: lineno, msg };
            let mut parts = line.split('\t');
            let (Some(node), Some(version), Some(csv), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(err("expected `<node>\\t<version>\\t<csv>`".into()));
            };
            let node: NodeRef = node.parse().map_err(err)?;
            let version: u64 = version.parse().map_err(|e| err(format!("bad version: {e}")))?;
            let vector = parse_csv_f32(csv).map_err(err)?;
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(err("non-finite embedding".into()));
            }
            if *dim.get_or_insert(vector.len()) != vector.len() {
                return Err(err(format!("embedding of width {} in a file of width {}", vector.len(), dim.unwrap())));
            }
            if store.get(node).is_some() {
                return Err(err(format!("duplicate record for {node}")));
            }
            store.insert(EmbeddingRecord {
                node,
                vector,
                version,
                produced_at: 0,
                model_id: 0,
            });
        }
        Ok(store)
    }

    pub fn import(path: impl AsRef<Path>) -> Result<Self, NearlineError> {
        Self::import_from(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn versions_increase() {
        let s = EmbeddingStore::<f32>::with_audit();
        let n = NodeRef::job(9);
        assert_eq!(s.publish(n, vec![1.0], 5, 1).version, 1);
        assert_eq!(s.publish(n, vec![1.0], 6, 1).version, 2);
        assert_eq!(s.audit_log(), vec![(n, 1), (n, 2)]);
    }

    #[test]
    fn export_round_trip() {
        let s = EmbeddingStore::<f32>::new();
        s.publish(NodeRef::job(2), vec![0.1, -1.0 / 3.0], 0, 0);
        s.publish(NodeRef::member(1), vec![1e-30, 2.5], 0, 0);
        s.publish(NodeRef::member(1), vec![1e-30, 3.5], 0, 0);
        let mut buf = Vec::new();
        s.export_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("Member:1\t2\t0.000000000000000000000000000001,3.5\n"));
        let back = EmbeddingStore::import_from(buf.as_slice()).unwrap();
        assert_eq!(back.checksum(), s.checksum());
    }

    #[test]
    fn import_names_the_line() {
        let err = EmbeddingStore::import_from("Job:1\t1\t0.5\nJob:2\tx\t0.5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, NearlineError::Parse { line: 2, .. }));
    }
}
