//! Binary weight store.
//!
//! Layout, little-endian:
//!
//! ```text
//! "GRMW" | version: u32 | variant tag: u32 | layer count: u32
//! layer count × ( in_dim: u32 | out_dim: u32 | in·out weights f64 (row-major) | out biases f64 )
//! ```
//!
//! Layers are stored as graph layer, embedding head (graph variants only),
//! then the three classifier layers. Variant tags: 0 plain, 1 gcn, 2 sage.

use std::io::{Read, Write};
use std::path::Path;

use super::{EmbeddingModel, LayerParams, Mlp, Variant};
use crate::store::{read_f64, read_magic, read_u32, write_u32, Result, StoreError};
use crate::DenseMatrix;

pub const WEIGHT_MAGIC: &[u8; 4] = b"GRMW";
pub const WEIGHT_VERSION: u32 = 1;

pub fn write_weights(model: &EmbeddingModel, mut w: impl Write) -> Result<()> {
    let layers: Vec<&LayerParams> = model
        .graph_layer
        .iter()
        .chain(model.embed_head.iter())
        .chain(model.mlp.layers.iter())
        .collect();
    w.write_all(WEIGHT_MAGIC)?;
    write_u32(&mut w, WEIGHT_VERSION)?;
    write_u32(&mut w, model.variant.tag())?;
    write_u32(&mut w, layers.len() as u32)?;
    for layer in layers {
        write_u32(&mut w, layer.in_dim() as u32)?;
        write_u32(&mut w, layer.out_dim() as u32)?;
        for v in layer.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_weights(mut r: impl Read) -> Result<EmbeddingModel> {
    read_magic(&mut r, WEIGHT_MAGIC)?;
    let version = read_u32(&mut r)?;
    if version != WEIGHT_VERSION {
        return Err(StoreError::UnsupportedVersion(version));
    }
    let tag = read_u32(&mut r)?;
    let variant = Variant::from_tag(tag).ok_or_else(|| StoreError::Invalid(format!("unknown variant tag {tag}")))?;
    let count = read_u32(&mut r)? as usize;
    let expected = if variant == Variant::Plain { 3 } else { 5 };
    if count != expected {
        return Err(StoreError::Invalid(format!(
            "{variant} model needs {expected} layers, file has {count}"
        )));
    }
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let in_dim = read_u32(&mut r)? as usize;
        let out_dim = read_u32(&mut r)? as usize;
        if in_dim == 0 || out_dim == 0 || in_dim > 1 << 16 || out_dim > 1 << 16 {
            return Err(StoreError::Invalid(format!("implausible layer shape {in_dim}x{out_dim}")));
        }
        let weights = (0..in_dim * out_dim).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        let bias = (0..out_dim).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        let weight = DenseMatrix::new(in_dim, out_dim, weights).expect("length matches");
        let layer = LayerParams { weight, bias };
        if !layer.is_finite() {
            return Err(StoreError::Invalid("non-finite weight".into()));
        }
        layers.push(layer);
    }
    let mut it = layers.into_iter();
    let (graph_layer, embed_head) = if variant == Variant::Plain {
        (None, None)
    } else {
        (it.next(), it.next())
    };
    let mlp_layers: [LayerParams; 3] = [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
    let mlp = Mlp::from_layers(mlp_layers).map_err(|e| StoreError::Invalid(e.to_string()))?;
    let model = EmbeddingModel {
        variant,
        graph_layer,
        embed_head,
        mlp,
    };
    model.validate().map_err(|e| StoreError::Invalid(e.to_string()))?;
    Ok(model)
}

pub fn save_weights(model: &EmbeddingModel, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_weights(model, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<EmbeddingModel> {
    let bytes = std::fs::read(path).map_err(StoreError::Io)?;
    let mut cursor = std::io::Cursor::new(&bytes[..]);
    let model = read_weights(&mut cursor)?;
    if cursor.position() as usize != bytes.len() {
        return Err(StoreError::Invalid("trailing bytes after last layer".into()));
    }
    Ok(model)
}
