//! Example file: `member_id<TAB>job_id<TAB>aux_csv<TAB>label<TAB>timestamp_ms`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{RankingError, RankingExample};
use crate::graph::{parse_csv_f32, push_csv};

pub fn write_examples_to<W: Write>(mut w: W, examples: &[RankingExample]) -> std::io::Result<()> {
    let mut line = String::new();
    for e in examples {
        line.clear();
        line.push_str(&format!("{}\t{}\t", e.member.id, e.job.id));
        push_csv(&mut line, &e.aux);
        line.push_str(&format!("\t{}\t{}\n", e.label, e.timestamp));
        w.write_all(line.as_bytes())?;
    }
    w.flush()
}

pub fn write_examples(path: &Path, examples: &[RankingExample]) -> std::io::Result<()> {
    write_examples_to(BufWriter::new(File::create(path)?), examples)
}

pub fn read_examples_from<R: BufRead>(r: R) -> Result<Vec<RankingExample>, RankingError> {
    let mut out: Vec<RankingExample> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| RankingError::Parse { line: n, msg };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(err(format!("expected 5 tab-separated fields, found {}", f.len())));
        }
        let member = f[0].parse::<u64>().map_err(|e| err(format!("member id `{}`: {e}", f[0])))?;
        let job = f[1].parse::<u64>().map_err(|e| err(format!("job id `{}`: {e}", f[1])))?;
        let aux = parse_csv_f32(f[2]).map_err(err)?;
        if aux.iter().any(|x| !x.is_finite()) {
            return Err(err("non-finite auxiliary feature".into()));
        }
        if let Some(first) = out.first() {
            if first.aux.len() != aux.len() {
                return Err(err(format!(
                    "{} auxiliary features, earlier lines have {}",
                    aux.len(),
                    first.aux.len()
                )));
            }
        }
        let label = match f[3] {
            "0" => 0,
            "1" => 1,
            other => return Err(err(format!("label must be 0 or 1, found `{other}`"))),
        };
        let ts = f[4].parse::<i64>().map_err(|e| err(format!("timestamp `{}`: {e}", f[4])))?;
        out.push(RankingExample::new(member, job, aux, label, ts));
    }
    Ok(out)
}

pub fn read_examples(path: &Path) -> Result<Vec<RankingExample>, RankingError> {
    read_examples_from(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let ex = vec![
            RankingExample::new(3, 9, vec![0.5, 1.0 / 3.0], 1, 1_700_000_000_000),
            RankingExample::new(4, 2, vec![0.0, 2.0], 0, 7),
        ];
        let mut buf = Vec::new();
        write_examples_to(&mut buf, &ex).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("3\t9\t0.5,0.33333334\t1\t1700000000000\n"));
        assert_eq!(read_examples_from(buf.as_slice()).unwrap(), ex);
    }

    #[test]
    fn errors_name_the_line() {
        let bad = "1\t2\t0.5\t1\t5\n1\t2\t0.5,1\t1\t5\n";
        assert!(matches!(read_examples_from(bad.as_bytes()), Err(RankingError::Parse { line: 2, .. })));
        assert!(matches!(
            read_examples_from("1\t2\tx\t1\t5\n".as_bytes()),
            Err(RankingError::Parse { line: 1, .. })
        ));
    }
}
