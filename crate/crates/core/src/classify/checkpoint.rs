//! Self-describing binary model file.
//!
//! ```text
//! magic "DHNN" | version u16 | byte-order tag u32 (0x01020304 as written)
//! precision u8 (bytes per parameter, 4)
//! input_rows u32 | input_cols u32 | branch_maps u32 | bottleneck_maps u32
//! reduce_maps u32 | n_classes u32 | dropout_rate f64
//! class names: n_classes × (len u16, UTF-8)
//! layer count u32, then per layer: name (len u16, UTF-8), rank u8,
//!   dims rank × u32, bias count u32
//! parameter count u64, parameters f32
//! ```
//! All integers and floats little-endian.

use std::io::{Read, Write};

use super::network::{Network, NetworkSpec};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"DHNN";
const VERSION: u16 = 1;
const BYTE_ORDER: u32 = 0x0102_0304;
const MAX_NAME: usize = 1024;

/// A trained network with its class names.
#[derive(Clone, Debug)]
pub struct Model {
    pub network: Network<f32>,
    pub class_names: Vec<String>,
}

impl Model {
    pub fn new(network: Network<f32>, class_names: Vec<String>) -> Result<Self> {
        if class_names.len() != network.spec().n_classes {
            return Err(Error::ShapeMismatch {
                expected: format!("{} class names", network.spec().n_classes),
                found: class_names.len().to_string(),
            });
        }
        Ok(Model { network, class_names })
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let spec = self.network.spec();
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&BYTE_ORDER.to_le_bytes())?;
        out.write_all(&[4u8])?;
        for v in [
            spec.input_rows,
            spec.input_cols,
            spec.branch_maps,
            spec.bottleneck_maps,
            spec.reduce_maps,
            spec.n_classes,
        ] {
            out.write_all(&(v as u32).to_le_bytes())?;
        }
        out.write_all(&spec.dropout_rate.to_le_bytes())?;
        for name in &self.class_names {
            write_name(&mut out, name)?;
        }
        let layers = self.network.layers();
        out.write_all(&(layers.len() as u32).to_le_bytes())?;
        for layer in layers {
            write_name(&mut out, layer.name)?;
            let shape = layer.shape();
            out.write_all(&[shape.len() as u8])?;
            for d in shape {
                out.write_all(&(d as u32).to_le_bytes())?;
            }
            out.write_all(&(layer.biases as u32).to_le_bytes())?;
        }
        out.write_all(&(self.network.params.len() as u64).to_le_bytes())?;
        let mut bytes = Vec::with_capacity(self.network.params.len() * 4);
        for p in &self.network.params {
            bytes.extend_from_slice(&p.to_le_bytes());
        }
        out.write_all(&bytes)?;
        Ok(())
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut input, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a model checkpoint (bad magic)".into()));
        }
        let version = u16::from_le_bytes(take(&mut input)?);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let order: [u8; 4] = take(&mut input)?;
        if order != BYTE_ORDER.to_le_bytes() {
            return Err(Error::Format("checkpoint byte-order tag mismatch".into()));
        }
        let [precision] = take::<1, _>(&mut input)?;
        if precision != 4 {
            return Err(Error::Format(format!("unsupported parameter width {precision}")));
        }
        let mut dims = [0usize; 6];
        for d in &mut dims {
            *d = u32::from_le_bytes(take(&mut input)?) as usize;
        }
        let spec = NetworkSpec {
            input_rows: dims[0],
            input_cols: dims[1],
            branch_maps: dims[2],
            bottleneck_maps: dims[3],
            reduce_maps: dims[4],
            n_classes: dims[5],
            dropout_rate: f64::from_le_bytes(take(&mut input)?),
        };
        spec.validate()?;
        // guard against absurd sizes before allocating
        let maps = [spec.branch_maps, spec.bottleneck_maps, spec.reduce_maps, spec.n_classes];
        if spec.input_rows.saturating_mul(spec.input_cols) > 1 << 24 || maps.iter().any(|&m| m > 1 << 12) {
            return Err(Error::Format("checkpoint network is implausibly large".into()));
        }
        let layers = spec.layers();
        let class_names = (0..spec.n_classes)
            .map(|_| read_name(&mut input))
            .collect::<Result<Vec<_>>>()?;
        let n_layers = u32::from_le_bytes(take(&mut input)?) as usize;
        if n_layers != layers.len() {
            return Err(Error::Format(format!(
                "expected {} layers, found {n_layers}",
                layers.len()
            )));
        }
        for layer in &layers {
            let name = read_name(&mut input)?;
            let [rank] = take::<1, _>(&mut input)?;
            let mut shape = Vec::with_capacity(rank as usize);
            for _ in 0..rank {
                shape.push(u32::from_le_bytes(take(&mut input)?) as usize);
            }
            let biases = u32::from_le_bytes(take(&mut input)?) as usize;
            if name != layer.name || shape != layer.shape() || biases != layer.biases {
                return Err(Error::Format(format!(
                    "layer {name:?} {shape:?}+{biases} does not match expected {:?} {:?}+{}",
                    layer.name,
                    layer.shape(),
                    layer.biases
                )));
            }
        }
        let count = u64::from_le_bytes(take(&mut input)?);
        if count != spec.parameter_count() as u64 {
            return Err(Error::Format(format!(
                "expected {} parameters, header says {count}",
                spec.parameter_count()
            )));
        }
        // the stream may be shorter than the header claims; let it grow
        let mut bytes = Vec::new();
        input.by_ref().take(count * 4).read_to_end(&mut bytes)?;
        if bytes.len() as u64 != count * 4 {
            return Err(Error::Format("checkpoint truncated".into()));
        }
        let params: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Format("non-finite parameter in checkpoint".into()));
        }
        Model::new(Network::from_params(spec, params)?, class_names)
    }
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("checkpoint truncated".into()),
        _ => Error::Io(e),
    })
}

fn take<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(input, &mut buf)?;
    Ok(buf)
}

fn write_name<W: Write>(out: &mut W, name: &str) -> Result<()> {
    if name.len() > MAX_NAME {
        return Err(Error::invalid("name", "longer than 1024 bytes"));
    }
    out.write_all(&(name.len() as u16).to_le_bytes())?;
    out.write_all(name.as_bytes())?;
    Ok(())
}

fn read_name<R: Read>(input: &mut R) -> Result<String> {
    let len = u16::from_le_bytes(take(input)?) as usize;
    if len > MAX_NAME {
        return Err(Error::Format("name too long".into()));
    }
    let mut buf = vec![0u8; len];
    read_exact(input, &mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Format("name is not UTF-8".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> Model {
        let net = Network::new(NetworkSpec::new(12, 10, 3), 4).unwrap();
        Model::new(net, vec!["a".into(), "bb".into(), "walking".into()]).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        let back = Model::read(&buf[..]).unwrap();
        assert_eq!(back.class_names, m.class_names);
        assert_eq!(back.network.spec(), m.network.spec());
        assert_eq!(back.network.params, m.network.params);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let mut buf = Vec::new();
        model().write(&mut buf).unwrap();
        assert!(Model::read(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Model::read(&bad[..]).is_err());
        let mut bad = buf.clone();
        bad.swap(6, 9);
        assert!(Model::read(&bad[..]).is_err());
    }
}
