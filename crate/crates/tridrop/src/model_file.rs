//! The `TDRP` model file.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "TDRP"
//! 4       1     format version (1)
//! 5       8     header length H, little-endian u64
//! 13      H     header: UTF-8 `key=value` lines
//! 13+H    4P    parameters as little-endian f32, per layer weights
//!               (row-major, in_dim x out_dim) then bias
//! ```
//!
//! Header values escape `\`, newline and carriage return as `\\`, `\n`, `\r`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use tridrop_core::{
    ActivationKind, DenseLayer, DenseParams, Layer, LayerKind, LossKind, MaskMode, Matrix, Model,
    ModelSpec, TriDropLayer,
};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"TDRP";
pub const VERSION: u8 = 1;
/// Bytes before the header text.
pub const PREAMBLE_LEN: usize = 13;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            '\\' => out.push('\\'),
            'n' => out.push('\n'),
            'r' => out.push('\r'),
            _ => return None,
        }
    }
    Some(out)
}

fn header_text(model: &Model) -> String {
    let mut h = String::new();
    let _ = writeln!(h, "name={}", escape(&model.name));
    let _ = writeln!(h, "seed={}", model.seed);
    let _ = writeln!(h, "provenance={}", escape(&model.provenance));
    let _ = writeln!(h, "input_dim={}", model.input_dim());
    let _ = writeln!(h, "loss={}", model.loss.name());
    let _ = writeln!(h, "layers={}", model.layers().len());
    for (i, layer) in model.layers().iter().enumerate() {
        let p = layer.params();
        let _ = write!(
            h,
            "layer.{i}={} {} {} {}",
            layer.kind().name(),
            p.in_dim(),
            p.out_dim(),
            layer.activation().name()
        );
        if let Layer::TriDrop(t) = layer {
            let eval = t.eval_width.map_or("full".to_string(), |k| k.to_string());
            let _ = write!(h, " mode={} eval={eval}", t.mode.name());
        }
        h.push('\n');
    }
    let _ = writeln!(h, "param_count={}", model.param_count());
    h
}

pub fn encode(model: &Model) -> Vec<u8> {
    let header = header_text(model);
    let mut out = Vec::with_capacity(PREAMBLE_LEN + header.len() + 4 * model.param_count());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for v in model.flat_params() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct LayerLine {
    kind: LayerKind,
    in_dim: usize,
    out_dim: usize,
    activation: ActivationKind,
    mode: MaskMode,
    eval_width: Option<usize>,
}

fn parse_layer(value: &str, offset: u64) -> Result<LayerLine> {
    let bad = |what: &str| CliError::format(offset, format!("layer line {value:?}: {what}"));
    let mut parts = value.split(' ');
    let mut next = |what: &str| parts.next().ok_or_else(|| bad(what));
    let kind = LayerKind::from_name(next("missing kind")?).ok_or_else(|| bad("unknown kind"))?;
    let in_dim = next("missing in_dim")?.parse().map_err(|_| bad("bad in_dim"))?;
    let out_dim = next("missing out_dim")?.parse().map_err(|_| bad("bad out_dim"))?;
    let activation =
        ActivationKind::from_name(next("missing activation")?).ok_or_else(|| bad("unknown activation"))?;
    let mut line = LayerLine {
        kind,
        in_dim,
        out_dim,
        activation,
        mode: MaskMode::DeterministicPrefix,
        eval_width: None,
    };
    for extra in parts {
        match extra.split_once('=') {
            Some(("mode", m)) if kind == LayerKind::TriDrop => {
                line.mode = MaskMode::from_name(m).ok_or_else(|| bad("unknown mask mode"))?;
            }
            Some(("eval", "full")) if kind == LayerKind::TriDrop => line.eval_width = None,
            Some(("eval", k)) if kind == LayerKind::TriDrop => {
                line.eval_width = Some(k.parse().map_err(|_| bad("bad eval width"))?);
            }
            _ => return Err(bad("unexpected field")),
        }
    }
    Ok(line)
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < PREAMBLE_LEN {
        return Err(CliError::format(
            bytes.len() as u64,
            format!("file has {} bytes, shorter than the {PREAMBLE_LEN}-byte preamble", bytes.len()),
        ));
    }
    if &bytes[0..4] != MAGIC {
        return Err(CliError::format(0, "bad magic, expected \"TDRP\""));
    }
    if bytes[4] != VERSION {
        return Err(CliError::format(
            4,
            format!("unsupported format version {} (expected {VERSION})", bytes[4]),
        ));
    }
    let header_len = u64::from_le_bytes(bytes[5..13].try_into().unwrap());
    let header_end = (PREAMBLE_LEN as u64).checked_add(header_len).filter(|&e| e <= bytes.len() as u64);
    let Some(header_end) = header_end else {
        return Err(CliError::format(
            5,
            format!(
                "header length {header_len} exceeds the {} bytes after the preamble",
                bytes.len() - PREAMBLE_LEN
            ),
        ));
    };
    let header_end = header_end as usize;
    let text = std::str::from_utf8(&bytes[PREAMBLE_LEN..header_end])
        .map_err(|e| CliError::format((PREAMBLE_LEN + e.valid_up_to()) as u64, "header is not UTF-8"))?;

    let mut fields: BTreeMap<String, (String, u64)> = BTreeMap::new();
    let mut offset = PREAMBLE_LEN as u64;
    for line in text.split_terminator('\n') {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::format(offset, format!("header line {line:?} has no '='")))?;
        if fields.insert(key.to_string(), (value.to_string(), offset)).is_some() {
            return Err(CliError::format(offset, format!("duplicate header key {key:?}")));
        }
        offset += line.len() as u64 + 1;
    }
    let mut take = |key: &str| {
        fields
            .remove(key)
            .ok_or_else(|| CliError::format(PREAMBLE_LEN as u64, format!("header lacks {key:?}")))
    };
    let number = |(v, at): (String, u64), key: &str| -> Result<u64> {
        v.parse()
            .map_err(|_| CliError::format(at, format!("{key} must be a non-negative integer, got {v:?}")))
    };
    let text_field = |(v, at): (String, u64), key: &str| -> Result<String> {
        unescape(&v).ok_or_else(|| CliError::format(at, format!("bad escape in {key}")))
    };

    let name = text_field(take("name")?, "name")?;
    let seed = number(take("seed")?, "seed")?;
    let provenance = text_field(take("provenance")?, "provenance")?;
    let input_dim = number(take("input_dim")?, "input_dim")? as usize;
    let (loss_name, loss_at) = take("loss")?;
    let loss = LossKind::from_name(&loss_name)
        .ok_or_else(|| CliError::format(loss_at, format!("unknown loss {loss_name:?}")))?;
    let n_layers = number(take("layers")?, "layers")? as usize;
    let mut lines = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        let (v, at) = take(&format!("layer.{i}"))?;
        lines.push(parse_layer(&v, at)?);
    }
    let declared_params = take("param_count")?;
    if let Some((key, (_, at))) = fields.into_iter().next() {
        return Err(CliError::format(at, format!("unknown header key {key:?}")));
    }

    let mut spec = ModelSpec::new(&name, input_dim, loss).with_seed(seed);
    spec.provenance = provenance;
    for l in &lines {
        spec.layers.push(tridrop_core::LayerSpec {
            kind: l.kind,
            in_dim: l.in_dim,
            out_dim: l.out_dim,
            activation: l.activation,
        });
    }
    spec.validate()?;
    let param_count = spec.param_count();
    if number(declared_params.clone(), "param_count")? != param_count as u64 {
        return Err(CliError::format(
            declared_params.1,
            format!("param_count {} disagrees with the layers ({param_count})", declared_params.0),
        ));
    }

    let blob = &bytes[header_end..];
    let expected = 4 * param_count;
    if blob.len() != expected {
        return Err(CliError::format(
            header_end as u64,
            format!(
                "weight blob has {} bytes, expected {expected} for {param_count} parameters",
                blob.len()
            ),
        ));
    }
    let mut values = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    let mut layers = Vec::with_capacity(lines.len());
    for l in lines {
        let w: Vec<f32> = values.by_ref().take(l.in_dim * l.out_dim).collect();
        let b: Vec<f32> = values.by_ref().take(l.out_dim).collect();
        let params = DenseParams::new(Matrix::new(l.in_dim, l.out_dim, w)?, b)?;
        layers.push(match l.kind {
            LayerKind::Dense => Layer::Dense(DenseLayer {
                params,
                activation: l.activation,
            }),
            LayerKind::TriDrop => {
                if let Some(k) = l.eval_width {
                    if k == 0 || k > l.out_dim {
                        return Err(CliError::Config(format!(
                            "eval width {k} outside 1..={}",
                            l.out_dim
                        )));
                    }
                }
                Layer::TriDrop(TriDropLayer {
                    params,
                    activation: l.activation,
                    mode: l.mode,
                    eval_width: l.eval_width,
                })
            }
        });
    }
    Ok(Model::from_layers(&spec, layers)?)
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, encode(model)).map_err(|e| CliError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Model> {
    decode(&fs::read(path).map_err(|e| CliError::io(path, e))?)
}
