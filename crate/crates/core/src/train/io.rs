//! Label file: `member_id<TAB>job_id<TAB>label<TAB>timestamp_ms` per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{LabeledPair, TrainError};

pub fn write_labels_to<W: Write>(mut w: W, pairs: &[LabeledPair]) -> std::io::Result<()> {
    for p in pairs {
        writeln!(w, "{}\t{}\t{}\t{}", p.member.id, p.job.id, p.label, p.timestamp)?;
    }
    w.flush()
}

pub fn write_labels(path: &Path, pairs: &[LabeledPair]) -> std::io::Result<()> {
    write_labels_to(BufWriter::new(File::create(path)?), pairs)
}

pub fn read_labels_from<R: BufRead>(r: R) -> Result<Vec<LabeledPair>, TrainError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| TrainError::Parse { line: n, msg };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(err(format!("expected 4 tab-separated fields, found {}", f.len())));
        }
        let member = f[0].parse::<u64>().map_err(|e| err(format!("member id `{}`: {e}", f[0])))?;
        let job = f[1].parse::<u64>().map_err(|e| err(format!("job id `{}`: {e}", f[1])))?;
        let label = match f[2] {
            "0" => 0,
            "1" => 1,
            other => return Err(err(format!("label must be 0 or 1, found `{other}`"))),
        };
        let ts = f[3].parse::<i64>().map_err(|e| err(format!("timestamp `{}`: {e}", f[3])))?;
        out.push(LabeledPair::new(member, job, label, ts));
    }
    Ok(out)
}

pub fn read_labels(path: &Path) -> Result<Vec<LabeledPair>, TrainError> {
    read_labels_from(BufReader::new(File::open(path)?))
}
