//! Binary model files.
//!
//! One model is stored as
//!
//! ```text
//! "SEMLINK1"                    8 bytes
//! layer count                   u32 LE
//! per layer: rows, cols, tag    3 x u32 LE
//! per layer: weights, bias      f64 LE, weights row-major
//! ```
//!
//! A bundle is the encoder, decoder and classifier containers back to back.

use std::path::Path;

use crate::error::{Error, Result};

use super::model::{Activation, DenseModel, Layer};
use super::JsccModels;

const MAGIC: &[u8; 8] = b"SEMLINK1";
// Guards allocation when reading a corrupt header.
const MAX_DIM: u32 = 1 << 24;

pub fn write_model(model: &DenseModel, out: &mut Vec<u8>) {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(model.layers().len() as u32).to_le_bytes());
    for l in model.layers() {
        for v in [l.rows() as u32, l.cols() as u32, l.activation().tag()] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for l in model.layers() {
        for &v in l.weights().iter().chain(l.bias()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        let left = self.bytes.len() - self.pos;
        if left < n {
            return Err(Error::Format {
                offset: self.pos as u64,
                message: format!("truncated {what}: expected {n} bytes, found {left}"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn floats(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let raw = self.take(8 * n, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn model(&mut self) -> Result<DenseModel> {
        let start = self.pos;
        if self.take(8, "magic")? != MAGIC {
            return Err(Error::Format {
                offset: start as u64,
                message: "bad magic, expected \"SEMLINK1\"".into(),
            });
        }
        let count = self.u32("layer count")?;
        if count == 0 || count > 1024 {
            return Err(Error::Format {
                offset: (self.pos - 4) as u64,
                message: format!("implausible layer count {count}"),
            });
        }
        let mut headers = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let at = self.pos;
            let rows = self.u32("layer header")?;
            let cols = self.u32("layer header")?;
            let tag = self.u32("layer header")?;
            let activation = Activation::from_tag(tag).ok_or_else(|| Error::Format {
                offset: (at + 8) as u64,
                message: format!("unknown activation tag {tag}"),
            })?;
            if rows == 0 || cols == 0 || rows > MAX_DIM || cols > MAX_DIM {
                return Err(Error::Format {
                    offset: at as u64,
                    message: format!("invalid layer shape {rows}x{cols}"),
                });
            }
            headers.push((rows as usize, cols as usize, activation));
        }
        let mut layers = Vec::with_capacity(headers.len());
        for (rows, cols, activation) in headers {
            let weights = self.floats(rows * cols, "weights")?;
            let bias = self.floats(rows, "bias")?;
            layers.push(Layer::from_parts(rows, cols, activation, weights, bias)?);
        }
        DenseModel::from_layers(layers).map_err(|e| Error::Format {
            offset: start as u64,
            message: e.to_string(),
        })
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format {
                offset: self.pos as u64,
                message: format!("{} trailing bytes", self.bytes.len() - self.pos),
            });
        }
        Ok(())
    }
}

pub fn read_model(bytes: &[u8]) -> Result<DenseModel> {
    let mut r = Reader { bytes, pos: 0 };
    let m = r.model()?;
    r.finish()?;
    Ok(m)
}

pub fn write_bundle(models: &JsccModels, out: &mut Vec<u8>) {
    write_model(&models.encoder, out);
    write_model(&models.decoder, out);
    write_model(&models.classifier, out);
}

pub fn read_bundle(bytes: &[u8]) -> Result<JsccModels> {
    let mut r = Reader { bytes, pos: 0 };
    let encoder = r.model()?;
    let decoder = r.model()?;
    let classifier = r.model()?;
    r.finish()?;
    JsccModels::new(encoder, decoder, classifier)
}

pub fn save_model(path: impl AsRef<Path>, model: &DenseModel) -> Result<()> {
    let mut buf = Vec::new();
    write_model(model, &mut buf);
    std::fs::write(path.as_ref(), buf).map_err(|e| Error::io(path.as_ref(), e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DenseModel> {
    read_model(&std::fs::read(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?)
}

pub fn save_bundle(path: impl AsRef<Path>, models: &JsccModels) -> Result<()> {
    let mut buf = Vec::new();
    write_bundle(models, &mut buf);
    std::fs::write(path.as_ref(), buf).map_err(|e| Error::io(path.as_ref(), e))
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<JsccModels> {
    read_bundle(&std::fs::read(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jscc::Architecture;
    use crate::numerics::RandomSource;

    fn bits_equal(a: &DenseModel, b: &DenseModel) -> bool {
        a.layers().len() == b.layers().len()
            && a.layers().iter().zip(b.layers()).all(|(x, y)| {
                x.rows() == y.rows()
                    && x.cols() == y.cols()
                    && x.activation() == y.activation()
                    && x.weights()
                        .iter()
                        .zip(y.weights())
                        .all(|(p, q)| p.to_bits() == q.to_bits())
                    && x.bias().iter().zip(y.bias()).all(|(p, q)| p.to_bits() == q.to_bits())
            })
    }

    #[test]
    fn model_roundtrip_is_bitwise() {
        let mut rng = RandomSource::new(1);
        let mut m = DenseModel::random(&[4, 6, 3], Activation::Tanh, Activation::Softmax, &mut rng).unwrap();
        m.layers_mut()[0].weights_mut()[0] = -0.0;
        m.layers_mut()[0].weights_mut()[1] = f64::MIN_POSITIVE / 3.0;
        let mut buf = Vec::new();
        write_model(&m, &mut buf);
        assert_eq!(&buf[..8], b"SEMLINK1");
        assert_eq!(buf.len(), 8 + 4 + 2 * 12 + 8 * m.param_count());
        assert!(bits_equal(&read_model(&buf).unwrap(), &m));
    }

    #[test]
    fn bundle_roundtrip_through_file() {
        let mut rng = RandomSource::new(2);
        let models = JsccModels::random(10, 4, &Architecture::dense(12), &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save_bundle(&path, &models).unwrap();
        let back = load_bundle(&path).unwrap();
        assert!(bits_equal(&back.encoder, &models.encoder));
        assert!(bits_equal(&back.decoder, &models.decoder));
        assert!(bits_equal(&back.classifier, &models.classifier));
    }

    #[test]
    fn corrupt_files() {
        let mut rng = RandomSource::new(3);
        let m = DenseModel::random(&[2, 3], Activation::Relu, Activation::Sigmoid, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_model(&m, &mut buf);

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_model(&bad), Err(Error::Format { offset: 0, .. })));

        let err = read_model(&buf[..buf.len() - 5]).unwrap_err();
        match err {
            Error::Format { offset, message } => {
                assert_eq!(offset, 24 + 8 * 6);
                assert!(message.contains("expected 24 bytes, found 19"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }

        let mut bad = buf.clone();
        bad[20] = 77;
        assert!(matches!(read_model(&bad), Err(Error::Format { offset: 20, .. })));

        let mut long = buf.clone();
        long.push(0);
        assert!(read_model(&long).is_err());
    }

    #[test]
    fn missing_file_is_io() {
        let err = load_model("/nonexistent/dir/model.bin").unwrap_err();
        assert!(matches!(err, Error::Io { .. }) && err.is_io());
    }
}
