//! Binary model checkpoint: wiring triples, all parameters as little-endian
//! f32, and the solver config. Save(load(file)) reproduces the file byte for
//! byte.

use std::fs;
use std::path::Path;

use super::{LtcError, LtcModel, LtcParams, Synapse, WiringDiagram};

const MAGIC: &[u8; 4] = b"LTC1";
const VERSION: u32 = 1;

pub fn save_model(model: &LtcModel, path: &Path) -> Result<(), LtcError> {
    fs::write(path, model_to_bytes(model)).map_err(|e| LtcError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn model_to_bytes(model: &LtcModel) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let w = &model.wiring;
    for dim in [w.n_sensory, w.n_inter, w.n_command, w.n_motor, model.unfold] {
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    buf.extend_from_slice(&model.seed.to_le_bytes());
    buf.extend_from_slice(&(w.synapses.len() as u64).to_le_bytes());
    for syn in &w.synapses {
        buf.extend_from_slice(&(syn.src as u32).to_le_bytes());
        buf.extend_from_slice(&(syn.dst as u32).to_le_bytes());
        buf.push(syn.polarity as u8);
    }
    let p = &model.params;
    for arr in [&p.w, &p.a, &p.gamma, &p.mu, &p.tau, &p.head_w] {
        for &v in arr.iter() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    buf.extend_from_slice(&(p.head_b as f32).to_le_bytes());
    buf
}

pub fn load_model(path: &Path) -> Result<LtcModel, LtcError> {
    let buf = fs::read(path).map_err(|e| LtcError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    model_from_bytes(&buf)
}

pub fn model_from_bytes(buf: &[u8]) -> Result<LtcModel, LtcError> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != &MAGIC[..] {
        return Err(LtcError::BadCheckpoint {
            message: "bad magic".into(),
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(LtcError::BadCheckpoint {
            message: format!("unsupported version {version}"),
        });
    }
    let n_sensory = r.u32()? as usize;
    let n_inter = r.u32()? as usize;
    let n_command = r.u32()? as usize;
    let n_motor = r.u32()? as usize;
    let unfold = r.u32()? as usize;
    let seed = r.u64()?;
    let n_syn = r.u64()? as usize;
    let mut synapses = Vec::with_capacity(n_syn);
    for _ in 0..n_syn {
        let src = r.u32()? as usize;
        let dst = r.u32()? as usize;
        let polarity = r.take(1)?[0] as i8;
        synapses.push(Synapse { src, dst, polarity });
    }
    let wiring = WiringDiagram {
        n_sensory,
        n_inter,
        n_command,
        n_motor,
        synapses,
    };
    wiring.validate()?;

    let read_vec = |r: &mut Reader, n: usize| -> Result<Vec<f64>, LtcError> {
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push(f64::from(r.f32()?));
        }
        Ok(v)
    };
    let params = LtcParams {
        w: read_vec(&mut r, n_syn)?,
        a: read_vec(&mut r, n_syn)?,
        gamma: read_vec(&mut r, n_syn)?,
        mu: read_vec(&mut r, n_syn)?,
        tau: read_vec(&mut r, wiring.state_size())?,
        head_w: read_vec(&mut r, n_motor)?,
        head_b: f64::from(r.f32()?),
    };
    if r.pos != buf.len() {
        return Err(LtcError::BadCheckpoint {
            message: format!("{} trailing bytes", buf.len() - r.pos),
        });
    }
    Ok(LtcModel {
        wiring,
        params,
        unfold,
        seed,
    })
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LtcError> {
        if self.pos + n > self.buf.len() {
            return Err(LtcError::BadCheckpoint {
                message: "truncated file".into(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, LtcError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, LtcError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, LtcError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
