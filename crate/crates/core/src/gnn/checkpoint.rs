//! Binary parameter checkpoints.
//!
//! All integers are little-endian `u32` unless noted, all parameters
//! little-endian `f32`, matrices row-major. See the README for the layout.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::decoder::Decoder;
use super::mlp::{Dense, Mlp};
use super::model::Model;
use super::params::{Activation, AggregationMode, EncoderLayer, EncoderParams};
use crate::scalar::Scalar;

pub const MODEL_MAGIC: &[u8; 4] = b"LSGE";
pub const RANKER_MAGIC: &[u8; 4] = b"LSRK";
pub const FORMAT_VERSION: u32 = 1;

/// Refuse absurd dimensions before allocating.
const MAX_DIM: u32 = 1 << 20;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint of the expected kind (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct Out<W: Write>(W);

impl<W: Write> Out<W> {
    fn u8(&mut self, v: u8) -> std::io::Result<()> {
        self.0.write_all(&[v])
    }
    fn u32(&mut self, v: usize) -> std::io::Result<()> {
        self.0.write_all(&(v as u32).to_le_bytes())
    }
    fn reals<T: Scalar>(&mut self, v: &[T]) -> std::io::Result<()> {
        for x in v {
            self.0.write_all(&(x.as_f64() as f32).to_le_bytes())?;
        }
        Ok(())
    }
}

struct In<R: Read>(R);

impl<R: Read> In<R> {
    fn u8(&mut self) -> Result<u8, CheckpointError> {
        let mut b = [0u8; 1];
        self.0.read_exact(&mut b)?;
        Ok(b[0])
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        let mut b = [0u8; 4];
        self.0.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    fn dim(&mut self) -> Result<usize, CheckpointError> {
        let v = self.u32()?;
        if v == 0 || v > MAX_DIM {
            return Err(CheckpointError::Corrupt(format!("dimension {v} out of range")));
        }
        Ok(v as usize)
    }
    fn reals<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>, CheckpointError> {
        let mut buf = vec![0u8; 4 * n];
        self.0.read_exact(&mut buf)?;
        buf.chunks_exact(4)
            .map(|c| {
                let x = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                if x.is_finite() {
                    Ok(T::of(x as f64))
                } else {
                    Err(CheckpointError::Corrupt("non-finite parameter".into()))
                }
            })
            .collect()
    }
    fn magic(&mut self, expected: &[u8; 4]) -> Result<(), CheckpointError> {
        let mut m = [0u8; 4];
        self.0.read_exact(&mut m).map_err(|_| CheckpointError::BadMagic)?;
        if &m != expected {
            return Err(CheckpointError::BadMagic);
        }
        let v = self.u32()?;
        if v != FORMAT_VERSION {
            return Err(CheckpointError::UnsupportedVersion(v));
        }
        Ok(())
    }
}

fn write_mlp_header<W: Write, T>(o: &mut Out<W>, m: &Mlp<T>) -> std::io::Result<()> {
    o.u32(m.layers.len())?;
    for l in &m.layers {
        o.u32(l.in_dim)?;
        o.u32(l.out_dim)?;
    }
    Ok(())
}

fn write_mlp_body<W: Write, T: Scalar>(o: &mut Out<W>, m: &Mlp<T>) -> std::io::Result<()> {
    for t in m.tensors() {
        o.reals(t)?;
    }
    Ok(())
}

fn read_mlp_header<R: Read>(i: &mut In<R>) -> Result<Vec<(usize, usize)>, CheckpointError> {
    let n = i.dim()?;
    (0..n).map(|_| Ok((i.dim()?, i.dim()?))).collect()
}

fn read_mlp_body<R: Read, T: Scalar>(
    i: &mut In<R>,
    shape: &[(usize, usize)],
) -> Result<Mlp<T>, CheckpointError> {
    let mut layers = Vec::with_capacity(shape.len());
    for &(in_dim, out_dim) in shape {
        let weights = i.reals(in_dim * out_dim)?;
        let bias = i.reals(out_dim)?;
        layers.push(Dense {
            in_dim,
            out_dim,
            weights,
            bias,
        });
    }
    let m = Mlp { layers };
    m.validate().map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    Ok(m)
}

fn expect_end<R: Read>(i: &mut In<R>) -> Result<(), CheckpointError> {
    let mut b = [0u8; 1];
    match i.0.read(&mut b)? {
        0 => Ok(()),
        _ => Err(CheckpointError::Corrupt("trailing bytes".into())),
    }
}

/// Writes encoder and decoder parameters.
pub fn write_model<W: Write, T: Scalar>(w: W, model: &Model<T>) -> Result<(), CheckpointError> {
    let mut o = Out(w);
    let enc = model.encoder();
    o.0.write_all(MODEL_MAGIC)?;
    o.u32(FORMAT_VERSION as usize)?;
    o.u8(match enc.mode {
        AggregationMode::Mean => 0,
        AggregationMode::Attention => 1,
    })?;
    o.u8(u8::from(enc.type_encoding))?;
    o.u32(enc.feature_dim)?;
    o.u32(enc.layers.len())?;
    for l in &enc.layers {
        o.u32(l.in_dim)?;
        o.u32(l.out_dim)?;
        o.u8(match l.activation {
            Activation::Relu => 0,
            Activation::Identity => 1,
        })?;
    }
    match model.decoder() {
        Decoder::Dot => o.u8(0)?,
        Decoder::Cosine => o.u8(1)?,
        Decoder::Mlp(m) => {
            o.u8(2)?;
            write_mlp_header(&mut o, m)?;
        }
    }
    for t in enc.tensors() {
        o.reals(t)?;
    }
    if let Decoder::Mlp(m) = model.decoder() {
        write_mlp_body(&mut o, m)?;
    }
    o.0.flush()?;
    Ok(())
}

pub fn read_model<R: Read, T: Scalar>(r: R) -> Result<Model<T>, CheckpointError> {
    let mut i = In(r);
    i.magic(MODEL_MAGIC)?;
    let mode = match i.u8()? {
        0 => AggregationMode::Mean,
        1 => AggregationMode::Attention,
        v => return Err(CheckpointError::Corrupt(format!("aggregation mode {v}"))),
    };
    let type_encoding = match i.u8()? {
        0 => false,
        1 => true,
        v => return Err(CheckpointError::Corrupt(format!("type encoding flag {v}"))),
    };
    let feature_dim = i.dim()?;
    let n = i.dim()?;
    let mut shapes = Vec::with_capacity(n);
    for _ in 0..n {
        let (in_dim, out_dim) = (i.dim()?, i.dim()?);
        let act = match i.u8()? {
            0 => Activation::Relu,
            1 => Activation::Identity,
            v => return Err(CheckpointError::Corrupt(format!("activation {v}"))),
        };
        shapes.push((in_dim, out_dim, act));
    }
    let decoder_kind = i.u8()?;
    let mlp_shape = match decoder_kind {
        0 | 1 => None,
        2 => Some(read_mlp_header(&mut i)?),
        v => return Err(CheckpointError::Corrupt(format!("decoder kind {v}"))),
    };
    let mut layers = Vec::with_capacity(n);
    for (in_dim, out_dim, activation) in shapes {
        layers.push(EncoderLayer {
            in_dim,
            out_dim,
            transform: i.reals(out_dim * in_dim)?,
            bias: i.reals(out_dim)?,
            self_weights: i.reals(out_dim * in_dim)?,
            attention: i.reals(2 * out_dim)?,
            activation,
        });
    }
    let encoder = EncoderParams {
        mode,
        feature_dim,
        type_encoding,
        layers,
    };
    let decoder = match (decoder_kind, mlp_shape) {
        (0, _) => Decoder::Dot,
        (1, _) => Decoder::Cosine,
        (_, Some(s)) => Decoder::Mlp(read_mlp_body(&mut i, &s)?),
        _ => unreachable!(),
    };
    expect_end(&mut i)?;
    Model::new(encoder, decoder).map_err(|e| CheckpointError::Corrupt(e.to_string()))
}

pub fn save_model<T: Scalar>(path: &Path, model: &Model<T>) -> Result<(), CheckpointError> {
    write_model(BufWriter::new(File::create(path)?), model)
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<Model<T>, CheckpointError> {
    read_model(BufReader::new(File::open(path)?))
}

/// Width of the ranker's input blocks: `[member ‖ job ‖ aux]`, with
/// `embedding_dim == 0` for an aux-only ranker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankerShape {
    pub embedding_dim: usize,
    pub aux_dim: usize,
}

impl RankerShape {
    pub fn input_dim(self) -> usize {
        2 * self.embedding_dim + self.aux_dim
    }
}

/// Writes the ranker: input block widths, then the network.
pub fn write_ranker<W: Write, T: Scalar>(w: W, shape: RankerShape, mlp: &Mlp<T>) -> Result<(), CheckpointError> {
    if mlp.input_dim() != shape.input_dim() {
        return Err(CheckpointError::Corrupt(format!(
            "network takes {} inputs, shape declares {}",
            mlp.input_dim(),
            shape.input_dim()
        )));
    }
    let mut o = Out(w);
    o.0.write_all(RANKER_MAGIC)?;
    o.u32(FORMAT_VERSION as usize)?;
    o.u32(shape.embedding_dim)?;
    o.u32(shape.aux_dim)?;
    write_mlp_header(&mut o, mlp)?;
    write_mlp_body(&mut o, mlp)?;
    o.0.flush()?;
    Ok(())
}

pub fn read_ranker<R: Read, T: Scalar>(r: R) -> Result<(RankerShape, Mlp<T>), CheckpointError> {
    let mut i = In(r);
    i.magic(RANKER_MAGIC)?;
    let embedding_dim = i.u32()?;
    let aux_dim = i.u32()?;
    if embedding_dim > MAX_DIM || aux_dim > MAX_DIM {
        return Err(CheckpointError::Corrupt("input block width out of range".into()));
    }
    let shape = RankerShape {
        embedding_dim: embedding_dim as usize,
        aux_dim: aux_dim as usize,
    };
    let layers = read_mlp_header(&mut i)?;
    let m: Mlp<T> = read_mlp_body(&mut i, &layers)?;
    if m.input_dim() != shape.input_dim() {
        return Err(CheckpointError::Corrupt(format!(
            "network takes {} inputs, shape declares {}",
            m.input_dim(),
            shape.input_dim()
        )));
    }
    expect_end(&mut i)?;
    Ok((shape, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::params::EncoderConfig;

    fn model(decoder: Decoder<f32>, mode: AggregationMode) -> Model<f32> {
        let cfg = EncoderConfig {
            feature_dim: 5,
            layer_dims: vec![6, 3],
            mode,
            type_encoding: true,
        };
        Model::new(EncoderParams::init(&cfg, 11), decoder).unwrap()
    }

    #[test]
    fn round_trip_every_decoder() {
        for d in [Decoder::Dot, Decoder::Cosine, Decoder::Mlp(Mlp::init(6, &[4], 2))] {
            for mode in [AggregationMode::Mean, AggregationMode::Attention] {
                let m = model(d.clone(), mode);
                let mut buf = Vec::new();
                write_model(&mut buf, &m).unwrap();
                let back: Model<f32> = read_model(buf.as_slice()).unwrap();
                assert_eq!(back, m);
            }
        }
    }

    #[test]
    fn header_layout() {
        let m = model(Decoder::Dot, AggregationMode::Attention);
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        assert_eq!(&buf[..4], b"LSGE");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(buf[8], 1);
        assert_eq!(buf[9], 1);
        assert_eq!(u32::from_le_bytes(buf[10..14].try_into().unwrap()), 5);
        assert_eq!(u32::from_le_bytes(buf[14..18].try_into().unwrap()), 2);
        let header = 18 + 2 * 9 + 1;
        assert_eq!(buf.len(), header + 4 * m.encoder().parameter_count());
        let first = f32::from_le_bytes(buf[header..header + 4].try_into().unwrap());
        assert_eq!(first, m.encoder().layers[0].transform[0]);
    }

    #[test]
    fn rejects_corruption() {
        let m = model(Decoder::Dot, AggregationMode::Mean);
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        assert!(matches!(read_model::<_, f32>(&b"NOPE"[..]), Err(CheckpointError::BadMagic)));
        assert!(read_model::<_, f32>(&buf[..buf.len() - 2]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(matches!(read_model::<_, f32>(extra.as_slice()), Err(CheckpointError::Corrupt(_))));
        let mut v2 = buf.clone();
        v2[4] = 2;
        assert!(matches!(
            read_model::<_, f32>(v2.as_slice()),
            Err(CheckpointError::UnsupportedVersion(2))
        ));
    }

    #[test]
    fn ranker_round_trip() {
        let m: Mlp<f32> = Mlp::init(10, &[32, 32], 3);
        let shape = RankerShape {
            embedding_dim: 4,
            aux_dim: 2,
        };
        let mut buf = Vec::new();
        write_ranker(&mut buf, shape, &m).unwrap();
        let (s, back) = read_ranker::<_, f32>(buf.as_slice()).unwrap();
        assert_eq!((s, back), (shape, m.clone()));
        let wrong = RankerShape {
            embedding_dim: 4,
            aux_dim: 3,
        };
        assert!(write_ranker(Vec::new(), wrong, &m).is_err());
        assert!(matches!(read_model::<_, f32>(buf.as_slice()), Err(CheckpointError::BadMagic)));
    }
}
