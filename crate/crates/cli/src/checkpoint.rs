//! Model checkpoints: a small self-describing binary format that
//! round-trips every parameter matrix bit-for-bit (f64 little-endian),
//! together with the model configuration and the run seed that produced
//! it. Loading rebuilds the parameter layout for the target graph and
//! refuses name or shape mismatches rather than guessing.

use std::path::Path;

use mrgnn_core::model::{init_params, MrgnnParams};
use mrgnn_core::{Aggregator, ModelConfig, MultiplexGraph};

use crate::error::{CliError, CliResult};
use crate::report::write_atomic;

const MAGIC: &[u8; 8] = b"MRGNNCKP";
const VERSION: u32 = 1;

pub fn save(path: &Path, run_seed: u64, params: &MrgnnParams) -> CliResult<()> {
    let cfg = &params.config;
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    push_u64(&mut buf, run_seed);
    buf.push(match cfg.aggregator {
        Aggregator::Logit => 0,
        Aggregator::Semantic => 1,
    });
    buf.push(match cfg.score_sign {
        mrgnn_core::model::ScoreSign::Standard => 0,
        mrgnn_core::model::ScoreSign::LiteralPrinted => 1,
    });
    buf.push(cfg.fuse_layers as u8);
    push_u64(&mut buf, cfg.embed_dim as u64);
    push_u64(&mut buf, cfg.steps as u64);
    push_u64(&mut buf, cfg.neighbor_cap as u64);
    push_u64(&mut buf, cfg.init_seed);
    push_u64(&mut buf, params.layout.num_layers as u64);
    push_u64(&mut buf, params.layout.feature_width as u64);
    push_u64(&mut buf, params.store.len() as u64);
    for (name, value) in params.store.iter() {
        push_u64(&mut buf, name.len() as u64);
        buf.extend_from_slice(name.as_bytes());
        push_u64(&mut buf, value.rows() as u64);
        push_u64(&mut buf, value.cols() as u64);
        for &x in value.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    write_atomic(path, &buf)
}

pub fn load(path: &Path, graph: &MultiplexGraph) -> CliResult<(u64, MrgnnParams)> {
    let bytes = std::fs::read(path).map_err(|e| {
        CliError::usage(format!("cannot read checkpoint {}: {e}", path.display()))
    })?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };

    let magic = r.take(MAGIC.len())?;
    if magic != MAGIC {
        return Err(r.corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(r.corrupt(&format!("unsupported version {version}")));
    }
    let run_seed = r.u64()?;
    let aggregator = match r.u8()? {
        0 => Aggregator::Logit,
        1 => Aggregator::Semantic,
        other => return Err(r.corrupt(&format!("unknown aggregator code {other}"))),
    };
    let score_sign = match r.u8()? {
        0 => mrgnn_core::model::ScoreSign::Standard,
        1 => mrgnn_core::model::ScoreSign::LiteralPrinted,
        other => return Err(r.corrupt(&format!("unknown score-sign code {other}"))),
    };
    let fuse_layers = match r.u8()? {
        0 => false,
        1 => true,
        other => return Err(r.corrupt(&format!("unknown fuse flag {other}"))),
    };
    let config = ModelConfig {
        embed_dim: r.u64()? as usize,
        steps: r.u64()? as usize,
        neighbor_cap: r.u64()? as usize,
        aggregator,
        init_seed: r.u64()?,
        score_sign,
        fuse_layers,
    };
    let num_layers = r.u64()? as usize;
    let feature_width = r.u64()? as usize;
    if num_layers != graph.num_layers() {
        return Err(CliError::runtime(format!(
            "checkpoint {}: trained on {num_layers} layers but the dataset has {}",
            path.display(),
            graph.num_layers()
        )));
    }
    let expected_width = graph.attr_width() + graph.num_nodes();
    if feature_width != expected_width {
        return Err(CliError::runtime(format!(
            "checkpoint {}: feature width {feature_width} does not match the dataset's {expected_width}",
            path.display()
        )));
    }

    let mut params = init_params(&config, graph);
    let stored = r.u64()? as usize;
    if stored != params.store.len() {
        return Err(r.corrupt(&format!(
            "{stored} parameters stored, model defines {}",
            params.store.len()
        )));
    }
    for _ in 0..stored {
        let name_len = r.u64()? as usize;
        let name = core::str::from_utf8(r.take(name_len)?)
            .map_err(|_| r.corrupt("parameter name is not UTF-8"))?
            .to_string();
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let id = params
            .store
            .id(&name)
            .ok_or_else(|| r.corrupt(&format!("unknown parameter {name:?}")))?;
        let value = params.store.value_mut(id);
        if (value.rows(), value.cols()) != (rows, cols) {
            return Err(CliError::runtime(format!(
                "checkpoint {}: parameter {name:?} is {rows}x{cols}, model expects {}x{}",
                path.display(),
                value.rows(),
                value.cols()
            )));
        }
        let byte_len = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| r.corrupt("matrix size overflows"))?;
        let raw = r.take(byte_len)?;
        for (slot, chunk) in value.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
            *slot = f64::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    if r.pos != bytes.len() {
        return Err(r.corrupt("trailing bytes"));
    }
    Ok((run_seed, params))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> CliResult<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| self.corrupt("unexpected end of file"))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> CliResult<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> CliResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn corrupt(&self, what: &str) -> CliError {
        CliError::runtime(format!(
            "checkpoint {} is corrupt at byte {}: {what}",
            self.path.display(),
            self.pos
        ))
    }
}

fn push_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}
