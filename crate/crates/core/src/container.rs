//! Binary container for ground truths, ensembles and quadratic datasets.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! offset  size  field
//!      0     8  magic  b"MSENSBIN"
//!      8     4  version (u32, currently 1)
//!     12     4  kind    (u32: 1 ground truth, 2 ensemble, 3 quad dataset)
//!     16     8  d       (u64)
//!     24     8  r       (u64; 0 when unknown)
//!     32     8  m       (u64; sensors or samples, 0 for ground truths)
//!     40     8  seed    (u64)
//!     48     …  payload, f64 values in row-major order
//! ```
//!
//! Payloads:
//!
//! * ground truth: mode (0 spec, 1 experiment), κ, Σ* (r), U* (d×r),
//!   factor (d×r), X* (d×d)
//! * ensemble: labels (m), then each sensor as a full d×d matrix
//! * quad dataset: labels (m), then inputs (m×d)

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::matkit::Matrix;
use crate::quadnet::QuadDataset;
use crate::sensing::{packed_len, pack_upper, GroundTruth, MeasurementEnsemble, TruthMode};

pub const MAGIC: [u8; 8] = *b"MSENSBIN";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Kind {
    GroundTruth = 1,
    Ensemble = 2,
    QuadDataset = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub kind: Kind,
    pub d: u64,
    pub r: u64,
    pub m: u64,
    pub seed: u64,
}

impl Header {
    fn write(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.kind as u32).to_le_bytes())?;
        for v in [self.d, self.r, self.m, self.seed] {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    fn read(r: &mut impl Read) -> Result<Self> {
        let mut buf = [0u8; HEADER_LEN];
        r.read_exact(&mut buf)?;
        if buf[..8] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = u32::from_le_bytes(buf[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let kind = match u32::from_le_bytes(buf[12..16].try_into().unwrap()) {
            1 => Kind::GroundTruth,
            2 => Kind::Ensemble,
            3 => Kind::QuadDataset,
            k => return Err(Error::Format(format!("unknown kind {k}"))),
        };
        let word = |i: usize| u64::from_le_bytes(buf[16 + 8 * i..24 + 8 * i].try_into().unwrap());
        Ok(Header {
            kind,
            d: word(0),
            r: word(1),
            m: word(2),
            seed: word(3),
        })
    }
}

fn write_f64s(w: &mut impl Write, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated payload: {e}")))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn expect_eof(r: &mut impl Read) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(Error::Format("trailing bytes after payload".into())),
    }
}

fn to_usize(v: u64, what: &str) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Format(format!("{what} out of range")))
}

pub fn peek_kind(r: &mut impl Read) -> Result<Header> {
    Header::read(r)
}

pub fn write_ground_truth(w: &mut impl Write, gt: &GroundTruth) -> Result<()> {
    Header {
        kind: Kind::GroundTruth,
        d: gt.d as u64,
        r: gt.r as u64,
        m: 0,
        seed: gt.seed,
    }
    .write(w)?;
    let mode = match gt.mode {
        TruthMode::Spec => 0.0,
        TruthMode::Experiment => 1.0,
    };
    write_f64s(w, &[mode, gt.kappa])?;
    write_f64s(w, &gt.sigmastar)?;
    write_f64s(w, gt.ustar.as_slice())?;
    write_f64s(w, gt.factor.as_slice())?;
    write_f64s(w, gt.xstar.as_slice())?;
    Ok(())
}

pub fn read_ground_truth(r: &mut impl Read) -> Result<GroundTruth> {
    let h = Header::read(r)?;
    if h.kind != Kind::GroundTruth {
        return Err(Error::Format(format!("expected ground truth, found {:?}", h.kind)));
    }
    let d = to_usize(h.d, "d")?;
    let rank = to_usize(h.r, "r")?;
    if rank == 0 || rank > d {
        return Err(Error::Format(format!("rank {rank} invalid for d = {d}")));
    }
    let head = read_f64s(r, 2)?;
    let mode = match head[0] {
        m if m == 0.0 => TruthMode::Spec,
        m if m == 1.0 => TruthMode::Experiment,
        m => return Err(Error::Format(format!("unknown truth mode {m}"))),
    };
    let sigmastar = read_f64s(r, rank)?;
    let ustar = Matrix::from_vec(d, rank, read_f64s(r, d * rank)?);
    let factor = Matrix::from_vec(d, rank, read_f64s(r, d * rank)?);
    let xstar = Matrix::from_vec(d, d, read_f64s(r, d * d)?);
    expect_eof(r)?;
    Ok(GroundTruth {
        d,
        r: rank,
        ustar,
        sigmastar,
        xstar,
        kappa: head[1],
        factor,
        mode,
        seed: h.seed,
    })
}

pub fn write_ensemble(w: &mut impl Write, ens: &MeasurementEnsemble) -> Result<()> {
    Header {
        kind: Kind::Ensemble,
        d: ens.d() as u64,
        r: ens.rank_hint as u64,
        m: ens.m() as u64,
        seed: ens.seed,
    }
    .write(w)?;
    write_f64s(w, ens.labels())?;
    for i in 0..ens.m() {
        write_f64s(w, ens.sensor(i).as_slice())?;
    }
    Ok(())
}

pub fn read_ensemble(r: &mut impl Read) -> Result<MeasurementEnsemble> {
    let h = Header::read(r)?;
    if h.kind != Kind::Ensemble {
        return Err(Error::Format(format!("expected ensemble, found {:?}", h.kind)));
    }
    let d = to_usize(h.d, "d")?;
    let m = to_usize(h.m, "m")?;
    let labels = read_f64s(r, m)?;
    let mut packed = Vec::with_capacity(m * packed_len(d));
    for _ in 0..m {
        let a = Matrix::from_vec(d, d, read_f64s(r, d * d)?);
        if a.asymmetry() != 0.0 {
            return Err(Error::Format("stored sensor is not symmetric".into()));
        }
        packed.extend(pack_upper(&a));
    }
    expect_eof(r)?;
    let mut ens = MeasurementEnsemble::from_packed(d, packed, labels)?;
    ens.rank_hint = to_usize(h.r, "r")?;
    ens.seed = h.seed;
    Ok(ens)
}

pub fn write_quad_dataset(w: &mut impl Write, data: &QuadDataset) -> Result<()> {
    Header {
        kind: Kind::QuadDataset,
        d: data.d as u64,
        r: data.rank_hint as u64,
        m: data.n() as u64,
        seed: data.seed,
    }
    .write(w)?;
    write_f64s(w, &data.labels)?;
    write_f64s(w, &data.inputs)?;
    Ok(())
}

pub fn read_quad_dataset(r: &mut impl Read) -> Result<QuadDataset> {
    let h = Header::read(r)?;
    if h.kind != Kind::QuadDataset {
        return Err(Error::Format(format!("expected quad dataset, found {:?}", h.kind)));
    }
    let d = to_usize(h.d, "d")?;
    let n = to_usize(h.m, "m")?;
    let labels = read_f64s(r, n)?;
    let inputs = read_f64s(r, n * d)?;
    expect_eof(r)?;
    Ok(QuadDataset {
        d,
        inputs,
        labels,
        rank_hint: to_usize(h.r, "r")?,
        seed: h.seed,
    })
}
