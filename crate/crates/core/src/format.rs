//! Binary demo files (`demos/<demo_id>.bin`).
//!
//! Little-endian throughout. Layout:
//!
//! ```text
//! header   magic "DKAGDEMO" | version u32 | flags u32 | point_count u32 | frame_count u32
//!          dock x,y,yaw f64 | id str | scene_id str | provenance u8 [source_id str, dock_id u32]
//! frame    t u32 | n u32 | state pose 7×f64 | gripper f64 | action pose 7×f64 | cmd f64
//!          points n×3 f32 | labels n×u8 | colors n×3 f32 (flag bit 0)
//! ```
//!
//! `str` is a u32 byte length followed by UTF-8. Poses are position then
//! quaternion (w, x, y, z). Flag bit 1 marks a binary gripper; `point_count`
//! 0 means unconstrained.

use std::path::{Path, PathBuf};

use nalgebra::Point3;

use crate::demo::{
    validate_demo, Action, DemoFrame, Demonstration, Label, PointCloud, Provenance, RobotState,
    ValidationRules,
};
use crate::geometry::{PlanarPose, Pose};

pub const MAGIC: &[u8; 8] = b"DKAGDEMO";
pub const VERSION: u32 = 1;
const FLAG_COLORS: u32 = 1;
const FLAG_BINARY_GRIPPER: u32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum DemoIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format violation in `{field}` at byte {offset}")]
    Format { field: String, offset: usize },
    #[error("invariant violation: {0}")]
    Invariant(String),
}

/// Encoded demo plus the byte offset of every frame record.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub bytes: Vec<u8>,
    pub frame_offsets: Vec<u64>,
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

fn put_pose(buf: &mut Vec<u8>, p: &Pose) {
    let t = p.position();
    for c in [t.x, t.y, t.z].into_iter().chain(p.wxyz()) {
        buf.extend_from_slice(&c.to_le_bytes());
    }
}

/// Canonical serialization: a pure function of the demo and the rules.
pub fn encode_demo(d: &Demonstration, rules: &ValidationRules) -> Encoded {
    let has_colors = !d.frames.is_empty() && d.frames.iter().all(|f| f.cloud.colors().is_some());
    let mut flags = 0;
    if has_colors {
        flags |= FLAG_COLORS;
    }
    if rules.binary_gripper {
        flags |= FLAG_BINARY_GRIPPER;
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&flags.to_le_bytes());
    buf.extend_from_slice(&(rules.point_count.unwrap_or(0) as u32).to_le_bytes());
    buf.extend_from_slice(&(d.frames.len() as u32).to_le_bytes());
    for c in [d.docking.x, d.docking.y, d.docking.yaw] {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    put_str(&mut buf, &d.id);
    put_str(&mut buf, &d.scene_id);
    match &d.provenance {
        Provenance::Source => buf.push(0),
        Provenance::Augmented { source_id, dock_id } => {
            buf.push(1);
            put_str(&mut buf, source_id);
            buf.extend_from_slice(&dock_id.to_le_bytes());
        }
    }
    let mut frame_offsets = Vec::with_capacity(d.frames.len());
    for f in &d.frames {
        frame_offsets.push(buf.len() as u64);
        buf.extend_from_slice(&f.t.to_le_bytes());
        buf.extend_from_slice(&(f.cloud.len() as u32).to_le_bytes());
        put_pose(&mut buf, &f.state.ee_pose);
        buf.extend_from_slice(&f.state.gripper.to_le_bytes());
        put_pose(&mut buf, &f.action.target_pose);
        buf.extend_from_slice(&f.action.gripper_cmd.to_le_bytes());
        for p in f.cloud.points() {
            for c in p.iter() {
                buf.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        buf.extend(f.cloud.labels().iter().map(|l| l.code()));
        if has_colors {
            for c in f.cloud.colors().unwrap_or_default() {
                for v in c {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    Encoded {
        bytes: buf,
        frame_offsets,
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8], DemoIoError> {
        if self.buf.len() - self.pos < n {
            return Err(DemoIoError::Format {
                field: field.to_string(),
                offset: self.pos,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, field: &str) -> Result<u8, DemoIoError> {
        Ok(self.take(1, field)?[0])
    }

    fn u32(&mut self, field: &str) -> Result<u32, DemoIoError> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }

    fn f32(&mut self, field: &str) -> Result<f32, DemoIoError> {
        Ok(f32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }

    fn f64(&mut self, field: &str) -> Result<f64, DemoIoError> {
        Ok(f64::from_le_bytes(self.take(8, field)?.try_into().unwrap()))
    }

    fn string(&mut self, field: &str) -> Result<String, DemoIoError> {
        let start = self.pos;
        let n = self.u32(field)? as usize;
        let bytes = self.take(n, field)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| DemoIoError::Format {
            field: field.to_string(),
            offset: start,
        })
    }

    fn pose(&mut self, field: &str) -> Result<Pose, DemoIoError> {
        let mut v = [0.0; 7];
        for c in v.iter_mut() {
            *c = self.f64(field)?;
        }
        Ok(Pose::from_wxyz_unchecked([v[0], v[1], v[2]], [v[3], v[4], v[5], v[6]]))
    }
}

/// Decodes and validates; never repairs.
pub fn decode_demo(bytes: &[u8]) -> Result<(Demonstration, ValidationRules), DemoIoError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8, "magic")? != MAGIC {
        return Err(DemoIoError::Format {
            field: "magic".into(),
            offset: 0,
        });
    }
    let version_at = r.pos;
    if r.u32("version")? != VERSION {
        return Err(DemoIoError::Format {
            field: "version".into(),
            offset: version_at,
        });
    }
    let flags = r.u32("flags")?;
    let point_count = r.u32("point_count")? as usize;
    let frame_count = r.u32("frame_count")? as usize;
    let docking = PlanarPose {
        x: r.f64("dock.x")?,
        y: r.f64("dock.y")?,
        yaw: r.f64("dock.yaw")?,
    };
    let id = r.string("id")?;
    let scene_id = r.string("scene_id")?;
    let prov_at = r.pos;
    let provenance = match r.u8("provenance")? {
        0 => Provenance::Source,
        1 => Provenance::Augmented {
            source_id: r.string("provenance.source_id")?,
            dock_id: r.u32("provenance.dock_id")?,
        },
        _ => {
            return Err(DemoIoError::Format {
                field: "provenance".into(),
                offset: prov_at,
            })
        }
    };
    let has_colors = flags & FLAG_COLORS != 0;
    let rules = ValidationRules {
        point_count: (point_count > 0).then_some(point_count),
        binary_gripper: flags & FLAG_BINARY_GRIPPER != 0,
    };
    let mut frames = Vec::with_capacity(frame_count.min(1 << 16));
    for i in 0..frame_count {
        let t = r.u32(&format!("frames[{i}].t"))?;
        let n = r.u32(&format!("frames[{i}].n_points"))? as usize;
        let ee_pose = r.pose(&format!("frames[{i}].state.pose"))?;
        let gripper = r.f64(&format!("frames[{i}].state.gripper"))?;
        let target_pose = r.pose(&format!("frames[{i}].action.pose"))?;
        let gripper_cmd = r.f64(&format!("frames[{i}].action.cmd"))?;
        let field = format!("frames[{i}].points");
        let raw = r.take(n.checked_mul(12).ok_or(DemoIoError::Format { field: field.clone(), offset: r.pos })?, &field)?;
        let points: Vec<Point3<f64>> = raw
            .chunks_exact(12)
            .map(|c| {
                let v = |k: usize| f32::from_le_bytes(c[4 * k..4 * k + 4].try_into().unwrap()) as f64;
                Point3::new(v(0), v(1), v(2))
            })
            .collect();
        let labels = r
            .take(n, &format!("frames[{i}].labels"))?
            .iter()
            .map(|&c| Label::from_code(c))
            .collect();
        let mut cloud = PointCloud::new(points, labels).expect("equal lengths by construction");
        if has_colors {
            let mut colors = Vec::with_capacity(n);
            for _ in 0..n {
                let field = format!("frames[{i}].colors");
                colors.push([r.f32(&field)?, r.f32(&field)?, r.f32(&field)?]);
            }
            cloud = cloud.with_colors(colors).expect("equal lengths by construction");
        }
        frames.push(DemoFrame {
            t,
            cloud,
            state: RobotState { ee_pose, gripper },
            action: Action {
                target_pose,
                gripper_cmd,
            },
        });
    }
    if r.pos != bytes.len() {
        return Err(DemoIoError::Format {
            field: "trailing bytes".into(),
            offset: r.pos,
        });
    }
    let d = Demonstration {
        id,
        scene_id,
        docking,
        provenance,
        frames,
    };
    if let Some(v) = validate_demo(&d, &rules).into_iter().next() {
        return Err(DemoIoError::Invariant(v.to_string()));
    }
    Ok((d, rules))
}

pub fn read_demo(path: &Path) -> Result<(Demonstration, ValidationRules), DemoIoError> {
    let bytes = std::fs::read(path).map_err(|source| DemoIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_demo(&bytes)
}

pub fn write_demo(d: &Demonstration, rules: &ValidationRules, path: &Path) -> Result<Encoded, DemoIoError> {
    let enc = encode_demo(d, rules);
    std::fs::write(path, &enc.bytes).map_err(|source| DemoIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(enc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::tests::tiny_demo;

    fn rules() -> ValidationRules {
        ValidationRules {
            point_count: Some(6),
            binary_gripper: true,
        }
    }

    #[test]
    fn two_frame_round_trip() {
        let d = tiny_demo(2, 6);
        let enc = encode_demo(&d, &rules());
        let (back, r) = decode_demo(&enc.bytes).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(r, rules());
        assert_eq!(back.frames[0].cloud, d.frames[0].cloud.quantized());
        assert_eq!(back.frames[1].action, d.frames[1].action);
        assert_eq!(enc.frame_offsets.len(), 2);
    }

    #[test]
    fn canonical_bytes_are_stable() {
        let d = tiny_demo(3, 6);
        let a = encode_demo(&d, &rules()).bytes;
        let b = encode_demo(&d, &rules()).bytes;
        assert_eq!(a, b);
        let (back, _) = decode_demo(&a).unwrap();
        assert_eq!(encode_demo(&back, &rules()).bytes, a);
    }

    #[test]
    fn augmented_provenance_survives() {
        let mut d = tiny_demo(2, 6);
        d.provenance = Provenance::Augmented {
            source_id: "src_0".into(),
            dock_id: 3,
        };
        let (back, _) = decode_demo(&encode_demo(&d, &rules()).bytes).unwrap();
        assert_eq!(back.provenance, d.provenance);
    }

    #[test]
    fn colors_round_trip() {
        let mut d = tiny_demo(2, 6);
        for f in &mut d.frames {
            f.cloud = f.cloud.clone().with_colors(vec![[0.25, 0.5, 1.0]; 6]).unwrap();
        }
        let (back, _) = decode_demo(&encode_demo(&d, &rules()).bytes).unwrap();
        assert_eq!(back.frames[1].cloud.colors().unwrap()[0], [0.25, 0.5, 1.0]);
    }

    #[test]
    fn truncated_file_names_field() {
        let bytes = encode_demo(&tiny_demo(2, 6), &rules()).bytes;
        let err = decode_demo(&bytes[..bytes.len() - 3]).unwrap_err();
        match err {
            DemoIoError::Format { field, .. } => assert_eq!(field, "frames[1].labels"),
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(decode_demo(b"NOTADEMO"), Err(DemoIoError::Format { .. })));
    }

    #[test]
    fn invariant_violation_names_frame() {
        let mut d = tiny_demo(3, 6);
        d.frames[2].cloud = d.frames[2].cloud.select(&[0, 1, 2]);
        let bytes = encode_demo(&d, &rules()).bytes;
        let err = decode_demo(&bytes).unwrap_err().to_string();
        assert!(err.contains("frame 2"), "{err}");
    }
}
