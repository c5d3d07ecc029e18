//! Visual feature files.
//!
//! Layout, all fields little-endian:
//!
//! | field    | type                         |
//! |----------|------------------------------|
//! | magic    | `b"MOMV"`                    |
//! | version  | u32                          |
//! | F_v      | u32                          |
//! | L_frames | u32                          |
//! | fps      | f32                          |
//! | data     | f32 × F_v·L_frames, frame-major |

use std::io::{Read, Write};
use std::path::Path;

use super::bytes::{read_exact, read_f32, read_u32, Reader};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const FEATURE_MAGIC: &[u8; 4] = b"MOMV";
pub const FEATURE_VERSION: u32 = 1;

/// Features held as `F_v × L_frames`, the layout the model consumes.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureFile {
    pub frames: Tensor,
    pub fps: f32,
}

impl FeatureFile {
    pub fn new(frames: Tensor, fps: f32) -> Result<Self> {
        if frames.shape().len() != 2 {
            return Err(crate::error::shape_err(format!("features must be 2-D, got {:?}", frames.shape())));
        }
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::Config(format!("frame rate {fps} must be positive")));
        }
        Ok(Self { frames, fps })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let (fv, n) = (self.frames.rows(), self.frames.cols());
        w.write_all(FEATURE_MAGIC)?;
        w.write_all(&FEATURE_VERSION.to_le_bytes())?;
        w.write_all(&(fv as u32).to_le_bytes())?;
        w.write_all(&(n as u32).to_le_bytes())?;
        w.write_all(&self.fps.to_le_bytes())?;
        for f in 0..n {
            for d in 0..fv {
                w.write_all(&self.frames.at(d, f).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut r = Reader::new(r);
        let magic = read_exact::<4>(&mut r, "magic")?;
        if &magic != FEATURE_MAGIC {
            return Err(Error::Format(format!("not a feature file (magic {magic:?})")));
        }
        let version = read_u32(&mut r, "version")?;
        if version != FEATURE_VERSION {
            return Err(Error::UnsupportedFormat(format!("feature file version {version}")));
        }
        let fv = read_u32(&mut r, "F_v")? as usize;
        let n = read_u32(&mut r, "L_frames")? as usize;
        let fps = read_f32(&mut r, "fps")?;
        let len = fv.checked_mul(n).and_then(|x| x.checked_mul(4));
        let bytes = r.take_vec(len.ok_or_else(|| Error::Format("feature size overflow".into()))?, "feature data")?;
        if !r.at_end()? {
            return Err(Error::Format("trailing bytes after feature data".into()));
        }
        let vals: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        let frames = Tensor::from_fn(&[fv, n], |i| vals[(i % n) * fv + i / n]);
        Self::new(frames, fps)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_major_bytes() {
        let t = Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mut buf = Vec::new();
        FeatureFile::new(t.clone(), 25.0).unwrap().write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"MOMV");
        assert_eq!(buf.len(), 20 + 6 * 4);
        let data: Vec<f32> = buf[20..].chunks(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        assert_eq!(data, [1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        let back = FeatureFile::read_from(&buf[..]).unwrap();
        assert_eq!(back.frames, t);
        assert_eq!(back.fps, 25.0);
    }

    #[test]
    fn rejects_truncation_and_trailing() {
        let mut buf = Vec::new();
        FeatureFile::new(Tensor::full(&[2, 2], 1.0), 25.0).unwrap().write_to(&mut buf).unwrap();
        assert!(matches!(FeatureFile::read_from(&buf[..buf.len() - 1]), Err(Error::Format(_))));
        buf.push(0);
        assert!(matches!(FeatureFile::read_from(&buf[..]), Err(Error::Format(_))));
        assert!(FeatureFile::read_from(&b"MOMUxxxx"[..]).is_err());
    }
}
