//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "BRLCKPT\0"
//! version  u32
//! config   u64 length, UTF-8 bytes (canonical RunConfig text)
//! count    u32
//! count × record:
//!   name   u32 length, UTF-8 bytes
//!   kind   u8   0 = f64, 1 = u64
//!   rows   u64
//!   cols   u64
//!   data   rows·cols × 8 bytes, row-major
//! ```
//!
//! Records are written in a fixed order, so `encode(decode(b)) == b` for
//! every valid `b`.

use std::collections::BTreeMap;
use std::path::Path;

use crate::diffmath::nn::ParamEntry;
use crate::diffmath::{ParamGroup, ParamStore, Tensor};
use crate::envs::{Action, VecEnvSnapshot};
use crate::error::{Error, Result};
use crate::rl::{LatentValues, TrainerState};
use crate::rng::RngState;

pub const MAGIC: &[u8; 8] = b"BRLCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: String,
    pub params: Vec<ParamEntry>,
    pub trainer: Option<TrainerState>,
}

#[derive(Debug, Clone, PartialEq)]
enum Data {
    F64(Vec<f64>),
    U64(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq)]
struct Record {
    name: String,
    rows: u64,
    cols: u64,
    data: Data,
}

fn f64_rec(name: impl Into<String>, t: &Tensor) -> Record {
    Record {
        name: name.into(),
        rows: t.rows() as u64,
        cols: t.cols() as u64,
        data: Data::F64(t.data().to_vec()),
    }
}

fn f64_row(name: impl Into<String>, v: &[f64]) -> Record {
    Record {
        name: name.into(),
        rows: 1,
        cols: v.len() as u64,
        data: Data::F64(v.to_vec()),
    }
}

fn u64_row(name: impl Into<String>, v: &[u64]) -> Record {
    Record {
        name: name.into(),
        rows: 1,
        cols: v.len() as u64,
        data: Data::U64(v.to_vec()),
    }
}

fn rng_words(s: &RngState) -> Vec<u64> {
    let mut w: Vec<u64> = s
        .seed
        .chunks(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    w.push(s.stream);
    w.push(s.word_pos as u64);
    w.push((s.word_pos >> 64) as u64);
    w
}

fn rng_from_words(w: &[u64]) -> Result<RngState> {
    if w.len() != 7 {
        return Err(Error::Format("rng state needs 7 words".into()));
    }
    let mut seed = [0u8; 32];
    for (i, word) in w[..4].iter().enumerate() {
        seed[i * 8..i * 8 + 8].copy_from_slice(&word.to_le_bytes());
    }
    Ok(RngState {
        seed,
        stream: w[4],
        word_pos: (w[5] as u128) | ((w[6] as u128) << 64),
    })
}

fn rows_tensor(rows: &[Vec<f64>]) -> Result<Tensor> {
    if rows.is_empty() {
        return Ok(Tensor::zeros(0, 0));
    }
    Tensor::from_rows(rows)
}

impl Checkpoint {
    pub fn from_parts(config: String, store: &ParamStore, trainer: Option<TrainerState>) -> Self {
        Self {
            config,
            params: store.entries().to_vec(),
            trainer,
        }
    }

    /// A store with these parameters, in checkpoint order.
    pub fn param_store(&self) -> ParamStore {
        let mut s = ParamStore::new();
        for e in &self.params {
            s.add(e.name.clone(), e.group, e.value.clone());
        }
        s
    }

    fn records(&self) -> Vec<Record> {
        let mut out = Vec::new();
        for e in &self.params {
            out.push(f64_rec(format!("param/{}/{}", e.group.tag(), e.name), &e.value));
        }
        let Some(t) = &self.trainer else {
            return out;
        };
        for (i, a) in t.optimizer.iter().enumerate() {
            out.push(f64_rec(format!("opt/{i}"), a));
        }
        out.push(u64_row("rng/agent", &rng_words(&t.agent_rng)));
        out.push(u64_row("rng/bootstrap", &rng_words(&t.bootstrap_rng)));
        for (i, s) in t.envs.env_states.iter().enumerate() {
            out.push(f64_row(format!("env/state/{i}"), s));
        }
        for (i, r) in t.envs.rngs.iter().enumerate() {
            out.push(u64_row(format!("env/rng/{i}"), &rng_words(r)));
        }
        out.push(u64_row(
            "env/steps",
            &t.envs.steps.iter().map(|&s| s as u64).collect::<Vec<_>>(),
        ));
        out.push(f64_row("env/returns", &t.envs.running_returns));
        out.push(f64_rec("obs", &rows_tensor(&t.obs).expect("rectangular observations")));
        match t.prev_actions.first() {
            Some(Action::Discrete(_)) => {
                let idx: Vec<u64> = t
                    .prev_actions
                    .iter()
                    .map(|a| match a {
                        Action::Discrete(i) => *i as u64,
                        Action::Continuous(_) => u64::MAX,
                    })
                    .collect();
                out.push(u64_row("actions/discrete", &idx));
            }
            _ => {
                let rows: Vec<Vec<f64>> = t
                    .prev_actions
                    .iter()
                    .map(|a| match a {
                        Action::Continuous(v) => v.clone(),
                        Action::Discrete(i) => vec![*i as f64],
                    })
                    .collect();
                out.push(f64_rec("actions/continuous", &rows_tensor(&rows).expect("rectangular actions")));
            }
        }
        match &t.latent {
            None => {}
            Some(LatentValues::Rnn(h)) => out.push(f64_rec("latent/rnn/h", h)),
            Some(LatentValues::Dvrl { h, z, logw, summary }) => {
                out.push(f64_rec("latent/dvrl/h", h));
                out.push(f64_rec("latent/dvrl/z", z));
                out.push(f64_rec("latent/dvrl/logw", logw));
                out.push(f64_rec("latent/dvrl/summary", summary));
            }
        }
        out.push(u64_row("counters", &[t.steps_since_cut as u64, t.frames, t.segment]));
        out.push(f64_row("recent_returns", &t.recent_returns));
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let records = self.records();
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.extend_from_slice(&(self.config.len() as u64).to_le_bytes());
        b.extend_from_slice(self.config.as_bytes());
        b.extend_from_slice(&(records.len() as u32).to_le_bytes());
        for r in &records {
            b.extend_from_slice(&(r.name.len() as u32).to_le_bytes());
            b.extend_from_slice(r.name.as_bytes());
            match &r.data {
                Data::F64(v) => {
                    b.push(0);
                    b.extend_from_slice(&r.rows.to_le_bytes());
                    b.extend_from_slice(&r.cols.to_le_bytes());
                    for x in v {
                        b.extend_from_slice(&x.to_le_bytes());
                    }
                }
                Data::U64(v) => {
                    b.push(1);
                    b.extend_from_slice(&r.rows.to_le_bytes());
                    b.extend_from_slice(&r.cols.to_le_bytes());
                    for x in v {
                        b.extend_from_slice(&x.to_le_bytes());
                    }
                }
            }
        }
        b
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let n = cur.u64()?;
        let config = String::from_utf8(cur.take_len(n)?.to_vec())
            .map_err(|_| Error::Format("config is not UTF-8".into()))?;
        let count = cur.u32()?;
        let mut records = Vec::new();
        for _ in 0..count {
            let len = cur.u32()? as u64;
            let name = String::from_utf8(cur.take_len(len)?.to_vec())
                .map_err(|_| Error::Format("record name is not UTF-8".into()))?;
            let kind = cur.take(1)?[0];
            let rows = cur.u64()?;
            let cols = cur.u64()?;
            let n = rows
                .checked_mul(cols)
                .filter(|n| n.checked_mul(8).is_some_and(|b| b <= cur.remaining() as u64))
                .ok_or_else(|| Error::Format(format!("record `{name}` overruns the file")))?;
            let raw = cur.take_len(n * 8)?;
            let words = raw.chunks_exact(8).map(|c| c.try_into().expect("8 bytes"));
            let data = match kind {
                0 => Data::F64(words.map(f64::from_le_bytes).collect()),
                1 => Data::U64(words.map(u64::from_le_bytes).collect()),
                k => return Err(Error::Format(format!("record `{name}` has unknown kind {k}"))),
            };
            records.push(Record { name, rows, cols, data });
        }
        if cur.remaining() != 0 {
            return Err(Error::Format("trailing bytes after the last record".into()));
        }
        let ck = Self::from_records(config, records)?;
        // Anything that would not re-encode to the same bytes (duplicate or
        // reordered records, say) is rejected.
        if ck.encode() != bytes {
            return Err(Error::Format("records are not in canonical form".into()));
        }
        Ok(ck)
    }

    fn from_records(config: String, records: Vec<Record>) -> Result<Self> {
        let mut params = Vec::new();
        let mut rest: BTreeMap<String, Record> = BTreeMap::new();
        for r in records {
            if let Some(tail) = r.name.strip_prefix("param/") {
                let (tag, name) = tail
                    .split_once('/')
                    .ok_or_else(|| Error::Format(format!("bad parameter record `{}`", r.name)))?;
                let group = tag
                    .parse::<u8>()
                    .ok()
                    .and_then(ParamGroup::from_tag)
                    .ok_or_else(|| Error::Format(format!("bad parameter group in `{}`", r.name)))?;
                params.push(ParamEntry {
                    name: name.to_string(),
                    group,
                    value: tensor(&r)?,
                });
            } else if rest.insert(r.name.clone(), r).is_some() {
                return Err(Error::Format("duplicate record".into()));
            }
        }
        if rest.is_empty() {
            return Ok(Self {
                config,
                params,
                trainer: None,
            });
        }
        let mut take = |name: &str| {
            rest.remove(name)
                .ok_or_else(|| Error::Format(format!("missing record `{name}`")))
        };
        let mut optimizer = Vec::new();
        for i in 0..params.len() {
            optimizer.push(tensor(&take(&format!("opt/{i}"))?)?);
        }
        let agent_rng = rng_from_words(&words(&take("rng/agent")?)?)?;
        let bootstrap_rng = rng_from_words(&words(&take("rng/bootstrap")?)?)?;
        let steps: Vec<usize> = words(&take("env/steps")?)?
            .into_iter()
            .map(|s| usize::try_from(s).map_err(|_| Error::Format("step count too large".into())))
            .collect::<Result<_>>()?;
        let n_e = steps.len();
        let mut env_states = Vec::with_capacity(n_e);
        let mut env_rngs = Vec::with_capacity(n_e);
        for i in 0..n_e {
            env_states.push(floats(&take(&format!("env/state/{i}"))?)?);
            env_rngs.push(rng_from_words(&words(&take(&format!("env/rng/{i}"))?)?)?);
        }
        let running_returns = floats(&take("env/returns")?)?;
        let obs = tensor(&take("obs")?)?;
        let obs: Vec<Vec<f64>> = (0..obs.rows()).map(|i| obs.row_slice(i).to_vec()).collect();
        let prev_actions = if let Ok(r) = take("actions/discrete") {
            words(&r)?
                .into_iter()
                .map(|i| usize::try_from(i).map(Action::Discrete).map_err(|_| Error::Format("bad action".into())))
                .collect::<Result<Vec<_>>>()?
        } else {
            let a = tensor(&take("actions/continuous")?)?;
            (0..a.rows())
                .map(|i| Action::Continuous(a.row_slice(i).to_vec()))
                .collect()
        };
        let latent = if let Ok(h) = take("latent/rnn/h") {
            Some(LatentValues::Rnn(tensor(&h)?))
        } else if let Ok(h) = take("latent/dvrl/h") {
            Some(LatentValues::Dvrl {
                h: tensor(&h)?,
                z: tensor(&take("latent/dvrl/z")?)?,
                logw: tensor(&take("latent/dvrl/logw")?)?,
                summary: tensor(&take("latent/dvrl/summary")?)?,
            })
        } else {
            None
        };
        let counters = words(&take("counters")?)?;
        let [cut, frames, segment] = counters[..] else {
            return Err(Error::Format("counters need 3 words".into()));
        };
        let recent_returns = floats(&take("recent_returns")?)?;
        if let Some(name) = rest.keys().next() {
            return Err(Error::Format(format!("unexpected record `{name}`")));
        }
        Ok(Self {
            config,
            params,
            trainer: Some(TrainerState {
                optimizer,
                agent_rng,
                bootstrap_rng,
                envs: VecEnvSnapshot {
                    env_states,
                    rngs: env_rngs,
                    steps,
                    running_returns,
                },
                obs,
                prev_actions,
                latent,
                steps_since_cut: usize::try_from(cut).map_err(|_| Error::Format("bad counter".into()))?,
                frames,
                segment,
                recent_returns,
            }),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}

fn tensor(r: &Record) -> Result<Tensor> {
    match &r.data {
        Data::F64(v) => Tensor::new(r.rows as usize, r.cols as usize, v.clone()),
        Data::U64(_) => Err(Error::Format(format!("record `{}` should hold floats", r.name))),
    }
}

fn floats(r: &Record) -> Result<Vec<f64>> {
    match &r.data {
        Data::F64(v) if r.rows == 1 => Ok(v.clone()),
        _ => Err(Error::Format(format!("record `{}` should be a row of floats", r.name))),
    }
}

fn words(r: &Record) -> Result<Vec<u64>> {
    match &r.data {
        Data::U64(v) if r.rows == 1 => Ok(v.clone()),
        _ => Err(Error::Format(format!("record `{}` should be a row of integers", r.name))),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Format("unexpected end of file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn take_len(&mut self, n: u64) -> Result<&'a [u8]> {
        let n = usize::try_from(n).map_err(|_| Error::Format("length too large".into()))?;
        self.take(n)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
