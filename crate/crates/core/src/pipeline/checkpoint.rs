//! Binary checkpoints: an 8-byte magic, a format version, the config text,
//! the step counters, then named records of little-endian `f64` tensors.
//! All integers are little-endian.

use std::collections::BTreeMap;
use std::path::Path;

use super::{MelNorm, Model, SymbolClassifier};
use crate::content::{Codebook, Rvq};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const MAGIC: &[u8; 8] = b"VCFLOWCK";
pub const FORMAT_VERSION: u32 = 1;

fn ck(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

struct Record {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Record {
    fn tensor(name: impl Into<String>, t: &Tensor) -> Self {
        Self {
            name: name.into(),
            shape: t.shape().to_vec(),
            data: t.data().to_vec(),
        }
    }

    fn vector(name: impl Into<String>, v: &[f64]) -> Self {
        Self {
            name: name.into(),
            shape: vec![v.len()],
            data: v.to_vec(),
        }
    }
}

fn records(model: &Model) -> Vec<Record> {
    let mut out = Vec::new();
    for (_, p) in model.store.iter() {
        out.push(Record::tensor(format!("param/{}", p.name), &p.value));
    }
    for (i, b) in model.rvq.stages.iter().enumerate() {
        out.push(Record::tensor(format!("rvq/{i}/entries"), &b.entries));
        out.push(Record::vector(format!("rvq/{i}/counts"), &b.ema_counts));
        out.push(Record::tensor(format!("rvq/{i}/sums"), &b.ema_sums));
    }
    out.push(Record::vector("norm/mean", &model.mel_norm.mean));
    out.push(Record::vector("norm/std", &model.mel_norm.std));
    if let Some(c) = &model.classifier {
        out.push(Record::tensor("classifier/centroids", &c.centroids));
        out.push(Record::vector("classifier/voices", &[c.n_voices as f64]));
    }
    for (id, p) in model.store.iter() {
        if let (Some(m), Some(v)) = (&model.adam.m[id.index()], &model.adam.v[id.index()]) {
            out.push(Record::tensor(format!("adam_m/{}", p.name), m));
            out.push(Record::tensor(format!("adam_v/{}", p.name), v));
        }
    }
    out
}

pub fn encode_checkpoint(model: &Model) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(model.config_text.len() as u64).to_le_bytes());
    buf.extend_from_slice(model.config_text.as_bytes());
    buf.extend_from_slice(&model.step.to_le_bytes());
    buf.extend_from_slice(&model.adam.step.to_le_bytes());
    let recs = records(model);
    buf.extend_from_slice(&(recs.len() as u64).to_le_bytes());
    for r in recs {
        buf.extend_from_slice(&(r.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(r.name.as_bytes());
        buf.extend_from_slice(&(r.shape.len() as u32).to_le_bytes());
        for d in &r.shape {
            buf.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        for v in &r.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| ck("truncated file"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| ck("length overflows"))
    }

    fn string(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| ck("text is not UTF-8"))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8).ok() != Some(&MAGIC[..]) {
        return Err(ck("not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(ck(format!("format version {version}, expected {FORMAT_VERSION}")));
    }
    let n = r.len()?;
    let text = r.string(n)?;
    let step = r.u64()?;
    let adam_step = r.u64()?;
    let n_records = r.len()?;
    let mut recs = BTreeMap::new();
    for _ in 0..n_records {
        let n = r.u32()? as usize;
        let name = r.string(n)?;
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
        let count = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|&c| c.checked_mul(8).is_some_and(|b| b <= bytes.len()))
            .ok_or_else(|| ck(format!("record {name} is too large")))?;
        let raw = r.take(count * 8)?;
        let data: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        if recs.insert(name.clone(), Record { name, shape, data }).is_some() {
            return Err(ck("duplicate record"));
        }
    }
    if r.pos != bytes.len() {
        return Err(ck("trailing bytes"));
    }

    let mut model = Model::new(&text).map_err(|e| ck(format!("embedded config: {e}")))?;
    model.step = step;
    model.adam.step = adam_step;
    let tensor = |shape: &[usize], data: Vec<f64>| Tensor::new(shape.to_vec(), data).map_err(|e| ck(e.to_string()));

    let ids: Vec<_> = model.store.iter().map(|(id, p)| (id, p.name.clone(), p.value.shape().to_vec())).collect();
    for (id, name, shape) in &ids {
        let data = take_record(&mut recs, &format!("param/{name}"), shape)?;
        model.store.set_value(*id, tensor(shape, data)?)?;
    }
    let (v, d) = (model.config.rvq.codebook_size, model.config.model.ssl_dim);
    let mut stages = Vec::new();
    for i in 0..model.config.rvq.n_stages {
        let entries = tensor(&[v, d], take_record(&mut recs, &format!("rvq/{i}/entries"), &[v, d])?)?;
        let ema_counts = take_record(&mut recs, &format!("rvq/{i}/counts"), &[v])?;
        let ema_sums = tensor(&[v, d], take_record(&mut recs, &format!("rvq/{i}/sums"), &[v, d])?)?;
        stages.push(Codebook {
            entries,
            ema_counts,
            ema_sums,
        });
    }
    model.rvq = Rvq::new(stages)?;
    let m = model.config.mel.n_mels;
    model.mel_norm = MelNorm {
        mean: take_record(&mut recs, "norm/mean", &[m])?,
        std: take_record(&mut recs, "norm/std", &[m])?,
    };
    let classifier_shape = recs.get("classifier/centroids").map(|r| r.shape.clone());
    if let Some(shape) = classifier_shape {
        let voices = take_record(&mut recs, "classifier/voices", &[1])?[0];
        let centroids = tensor(&shape, take_record(&mut recs, "classifier/centroids", &shape)?)?;
        let n_voices = voices as usize;
        if shape.len() != 2
            || shape[1] != m
            || n_voices as f64 != voices
            || n_voices == 0
            || shape[0] % n_voices != 0
        {
            return Err(ck("malformed classifier record"));
        }
        model.classifier = Some(SymbolClassifier { centroids, n_voices });
    }
    for (id, name, shape) in &ids {
        if model.store.get(*id).requires_grad {
            model.adam.m[id.index()] = Some(tensor(shape, take_record(&mut recs, &format!("adam_m/{name}"), shape)?)?);
            model.adam.v[id.index()] = Some(tensor(shape, take_record(&mut recs, &format!("adam_v/{name}"), shape)?)?);
        }
    }
    if let Some(name) = recs.keys().next() {
        return Err(ck(format!("unexpected record {name}")));
    }
    Ok(model)
}

fn take_record(recs: &mut BTreeMap<String, Record>, name: &str, shape: &[usize]) -> Result<Vec<f64>> {
    let rec = recs.remove(name).ok_or_else(|| ck(format!("missing record {name}")))?;
    if rec.shape != shape {
        return Err(ck(format!("record {} has shape {:?}, expected {shape:?}", rec.name, rec.shape)));
    }
    if rec.data.iter().any(|v| !v.is_finite()) {
        return Err(ck(format!("record {} holds non-finite values", rec.name)));
    }
    Ok(rec.data)
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(model))?;
    Ok(())
}

/// Reads a checkpoint; unreadable files are reported as checkpoint errors.
pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| ck(format!("{}: {e}", path.display())))?;
    decode_checkpoint(&bytes)
}
