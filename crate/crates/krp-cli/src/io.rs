//! Binary tensor formats and the JSON sensor-model format.
//!
//! KTEN (dense tensor): magic `KTEN`, version u8 = 1, dtype u8 = 0
//! (little-endian IEEE-754 binary64), order u8, reserved u8 = 0, then
//! `d` u64 little-endian dims, then the payload first-index-fastest.
//!
//! KTUK (Tucker): magic `KTUK`, same header fields, then ambient dims
//! (d u64), core ranks (d u64), orthonormal flags (d u8), core payload,
//! then each factor column-major.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use krp::apps::sensors::SensorModel;
use krp::tensor::{DenseMatrix, DenseTensor};
use krp::tucker::TuckerTensor;
use serde::{Deserialize, Serialize};

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn write_header(w: &mut impl Write, magic: &[u8; 4], order: usize) -> io::Result<()> {
    let order = u8::try_from(order).map_err(|_| bad("order exceeds 255"))?;
    w.write_all(magic)?;
    w.write_all(&[1u8, 0u8, order, 0u8])
}

fn read_header(r: &mut impl Read, magic: &[u8; 4]) -> io::Result<usize> {
    let mut head = [0u8; 8];
    r.read_exact(&mut head)?;
    if &head[..4] != magic {
        return Err(bad(format!("bad magic, expected {:?}", std::str::from_utf8(magic).unwrap())));
    }
    if head[4] != 1 {
        return Err(bad(format!("unsupported version {}", head[4])));
    }
    if head[5] != 0 {
        return Err(bad(format!("unsupported dtype {}", head[5])));
    }
    if head[7] != 0 {
        return Err(bad("nonzero reserved byte"));
    }
    Ok(head[6] as usize)
}

fn write_u64s(w: &mut impl Write, vals: impl IntoIterator<Item = usize>) -> io::Result<()> {
    for v in vals {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    Ok(())
}

fn read_u64s(r: &mut impl Read, count: usize) -> io::Result<Vec<usize>> {
    let mut out = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        let v = u64::from_le_bytes(buf);
        out.push(usize::try_from(v).map_err(|_| bad(format!("dim {v} exceeds usize")))?);
    }
    Ok(out)
}

fn write_f64s(w: &mut impl Write, vals: &[f64]) -> io::Result<()> {
    for &v in vals {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s(r: &mut impl Read, count: usize) -> io::Result<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

fn expect_eof(r: &mut impl Read) -> io::Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(bad("trailing bytes after payload")),
    }
}

pub fn write_tensor(path: &Path, x: &DenseTensor) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, b"KTEN", x.order())?;
    write_u64s(&mut w, x.dims().iter().copied())?;
    write_f64s(&mut w, x.data())?;
    w.flush()
}

pub fn read_tensor(path: &Path) -> io::Result<DenseTensor> {
    let mut r = BufReader::new(File::open(path)?);
    let order = read_header(&mut r, b"KTEN")?;
    if order == 0 {
        return Err(bad("order must be >= 1"));
    }
    let dims = read_u64s(&mut r, order)?;
    let len = dims.iter().try_fold(1usize, |acc, &n| {
        if n == 0 { None } else { acc.checked_mul(n) }
    });
    let len = len.ok_or_else(|| bad("dims overflow or zero"))?;
    let data = read_f64s(&mut r, len)?;
    expect_eof(&mut r)?;
    Ok(DenseTensor::from_data(&dims, data))
}

pub fn write_tucker(path: &Path, t: &TuckerTensor) -> io::Result<()> {
    let d = t.order();
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, b"KTUK", d)?;
    write_u64s(&mut w, t.dims().iter().copied())?;
    write_u64s(&mut w, t.ranks().iter().copied())?;
    let flags: Vec<u8> = t.orthonormal.iter().map(|&b| b as u8).collect();
    w.write_all(&flags)?;
    write_f64s(&mut w, t.core.data())?;
    for f in &t.factors {
        write_f64s(&mut w, f.data())?;
    }
    w.flush()
}

pub fn read_tucker(path: &Path) -> io::Result<TuckerTensor> {
    let mut r = BufReader::new(File::open(path)?);
    let order = read_header(&mut r, b"KTUK")?;
    if order == 0 {
        return Err(bad("order must be >= 1"));
    }
    let dims = read_u64s(&mut r, order)?;
    let ranks = read_u64s(&mut r, order)?;
    let mut flags = vec![0u8; order];
    r.read_exact(&mut flags)?;
    if flags.iter().any(|&b| b > 1) {
        return Err(bad("orthonormal flags must be 0 or 1"));
    }
    let core_len = ranks.iter().try_fold(1usize, |acc, &n| {
        if n == 0 { None } else { acc.checked_mul(n) }
    });
    let core_len = core_len.ok_or_else(|| bad("ranks overflow or zero"))?;
    let core = DenseTensor::from_data(&ranks, read_f64s(&mut r, core_len)?);
    let mut factors = Vec::with_capacity(order);
    for i in 0..order {
        let data = read_f64s(&mut r, dims[i] * ranks[i])?;
        factors.push(DenseMatrix::from_col_major(dims[i], ranks[i], data));
    }
    expect_eof(&mut r)?;
    let t = TuckerTensor {
        core,
        factors,
        orthonormal: flags.iter().map(|&b| b == 1).collect(),
    };
    t.validate().map_err(|e| bad(e.to_string()))?;
    Ok(t)
}

#[derive(Serialize, Deserialize)]
struct FactorJson {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SensorModelJson {
    spatial_dims: Vec<usize>,
    indices: Vec<Vec<usize>>,
    factors: Vec<FactorJson>,
}

pub fn write_sensor_model(path: &Path, model: &SensorModel) -> io::Result<()> {
    let json = SensorModelJson {
        spatial_dims: model.spatial_dims().to_vec(),
        indices: model.indices().to_vec(),
        factors: model
            .factors()
            .iter()
            .map(|f| FactorJson { rows: f.rows(), cols: f.cols(), data: f.data().to_vec() })
            .collect(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &json)?;
    w.flush()
}

pub fn read_sensor_model(path: &Path) -> io::Result<SensorModel> {
    let json: SensorModelJson = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    for (f, &n) in json.factors.iter().zip(&json.spatial_dims) {
        if f.data.len() != f.rows * f.cols || f.rows != n {
            return Err(bad("factor shape mismatch"));
        }
    }
    let factors = json
        .factors
        .into_iter()
        .map(|f| DenseMatrix::from_col_major(f.rows, f.cols, f.data))
        .collect();
    SensorModel::from_parts(json.spatial_dims, json.indices, factors).map_err(|e| bad(e.to_string()))
}
