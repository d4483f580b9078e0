//! Line-delimited text format for [`HeteroGraph`].
//!
//! ```text
//! N<TAB><node_type><TAB><id><TAB><f32,f32,...>
//! E<TAB><edge_type><TAB><src_type>:<src_id><TAB><dst_type>:<dst_id><TAB><weight><TAB><0|1>
//! ```
//!
//! Node lines precede the edge lines that reference them. Floats use the
//! shortest representation that parses back to the same bits.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::store::HeteroGraph;
use super::types::{EdgeType, GraphSchema, NodeRef, NodeType};
use super::GraphError;

pub fn write_graph(graph: &HeteroGraph, path: impl AsRef<Path>) -> Result<(), GraphError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_graph_to(graph, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_graph_to(graph: &HeteroGraph, w: &mut impl Write) -> Result<(), GraphError> {
    let mut line = String::new();
    for node in graph.nodes() {
        line.clear();
        let _ = write!(line, "N\t{}\t{}\t", node.node_type, node.id);
        push_csv(&mut line, graph.features(node).unwrap_or_default());
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    for e in graph.edge_log() {
        writeln!(
            w,
            "E\t{}\t{}\t{}\t{}\t{}",
            e.edge_type,
            e.src,
            e.dst,
            e.weight,
            u8::from(e.reciprocal)
        )?;
    }
    Ok(())
}

/// Reads a graph file, inferring per-type feature dimensions from the data.
/// Node types absent from the file keep the default dimension.
pub fn read_graph(path: impl AsRef<Path>) -> Result<HeteroGraph, GraphError> {
    let file = File::open(path)?;
    read_graph_from(BufReader::new(file), None)
}

/// Reads a graph file, enforcing `schema`.
pub fn read_graph_with_schema(
    path: impl AsRef<Path>,
    schema: GraphSchema,
) -> Result<HeteroGraph, GraphError> {
    let file = File::open(path)?;
    read_graph_from(BufReader::new(file), Some(schema))
}

pub fn read_graph_from(
    reader: impl Read,
    schema: Option<GraphSchema>,
) -> Result<HeteroGraph, GraphError> {
    let reader = BufReader::new(reader);
    let mut fixed = schema.is_some();
    let mut graph = HeteroGraph::new(schema.unwrap_or_default());
    let mut seen_dim = [None::<usize>; NodeType::COUNT];

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| GraphError::Parse { line: line_no, msg };
        let fields: Vec<&str> = line.split('\t').collect();
        match fields[0] {
            "N" => {
                if fields.len() != 4 {
                    return Err(err(format!("node line has {} fields, expected 4", fields.len())));
                }
                let node_type: NodeType = fields[1].parse().map_err(err)?;
                let id: u64 = fields[2]
                    .parse()
                    .map_err(|e| err(format!("bad node id `{}`: {e}", fields[2])))?;
                let features = parse_csv_f32(fields[3]).map_err(err)?;
                if !fixed {
                    match seen_dim[node_type.index()] {
                        None => {
                            seen_dim[node_type.index()] = Some(features.len());
                            let schema = graph.schema().with_dim(node_type, features.len());
                            graph = rebuild_with_schema(graph, schema);
                        }
                        Some(d) if d != features.len() => {
                            return Err(err(format!(
                                "{node_type} features have {} entries, earlier nodes had {d}",
                                features.len()
                            )));
                        }
                        Some(_) => {}
                    }
                }
                graph
                    .add_node(NodeRef::new(node_type, id), features)
                    .map_err(|e| err(e.to_string()))?;
            }
            "E" => {
                // Once edges start, inferred dimensions are frozen.
                fixed = true;
                if fields.len() != 6 {
                    return Err(err(format!("edge line has {} fields, expected 6", fields.len())));
                }
                let edge_type: EdgeType = fields[1].parse().map_err(err)?;
                let src: NodeRef = fields[2].parse().map_err(err)?;
                let dst: NodeRef = fields[3].parse().map_err(err)?;
                let weight: f64 = fields[4]
                    .parse()
                    .map_err(|e| err(format!("bad weight `{}`: {e}", fields[4])))?;
                let reciprocal = match fields[5] {
                    "0" => false,
                    "1" => true,
                    other => return Err(err(format!("reciprocal flag must be 0 or 1, got `{other}`"))),
                };
                for n in [src, dst] {
                    if !graph.contains(n) {
                        return Err(err(format!("edge references undeclared node {n}")));
                    }
                }
                graph
                    .add_edge(edge_type, src, dst, weight, reciprocal)
                    .map_err(|e| err(e.to_string()))?;
            }
            other => return Err(err(format!("unknown record tag `{other}`"))),
        }
    }
    Ok(graph)
}

// Only ever called before any node of the type exists, so no stored node
// can conflict with the new schema.
fn rebuild_with_schema(graph: HeteroGraph, schema: GraphSchema) -> HeteroGraph {
    let mut next = HeteroGraph::new(schema);
    for n in graph.nodes() {
        next.add_node(n, graph.features(n).unwrap().to_vec())
            .expect("existing node conforms to schema");
    }
    next
}

pub(crate) fn push_csv<T: std::fmt::Display>(out: &mut String, values: &[T]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v}");
    }
}

pub(crate) fn parse_csv_f32(s: &str) -> Result<Vec<f32>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f32>()
                .map_err(|e| format!("bad float `{t}`: {e}"))
        })
        .collect()
}
