use std::io::{Read, Write};

use ply_rs_bw::parser::Parser;
use ply_rs_bw::ply::{Addable, DefaultElement, ElementDef, Encoding, Ply, Property, PropertyDef, PropertyType, ScalarType};
use ply_rs_bw::writer::Writer;
use serde::{Deserialize, Serialize};

use super::IoError;
use crate::geom::{PointCloud, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlyEncoding {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

fn as_f64(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Float(v) => f64::from(v),
        Property::Double(v) => v,
        Property::Char(v) => f64::from(v),
        Property::UChar(v) => f64::from(v),
        Property::Short(v) => f64::from(v),
        Property::UShort(v) => f64::from(v),
        Property::Int(v) => f64::from(v),
        Property::UInt(v) => f64::from(v),
        _ => return None,
    })
}

fn as_i64(p: &Property) -> Option<i64> {
    Some(match *p {
        Property::Char(v) => i64::from(v),
        Property::UChar(v) => i64::from(v),
        Property::Short(v) => i64::from(v),
        Property::UShort(v) => i64::from(v),
        Property::Int(v) => i64::from(v),
        Property::UInt(v) => i64::from(v),
        _ => return None,
    })
}

/// Reads the `vertex` element: x/y/z, optional red/green/blue and
/// optional instance_id (negative = unlabeled).
pub fn read_ply(mut reader: impl Read) -> Result<PointCloud, IoError> {
    let ply = Parser::<DefaultElement>::new().read_ply(&mut reader).map_err(|e| IoError::Format(format!("ply: {e}")))?;
    let verts = ply.payload.get("vertex").ok_or_else(|| IoError::Format("ply has no vertex element".into()))?;
    let def = &ply.header.elements.get("vertex").expect("payload implies header").properties;
    let has = |k: &str| def.contains_key(k);
    for k in ["x", "y", "z"] {
        if !has(k) {
            return Err(IoError::Format(format!("vertex element lacks {k}")));
        }
    }
    let has_color = has("red") && has("green") && has("blue");
    let has_label = has("instance_id");

    let mut points = Vec::with_capacity(verts.len());
    let mut colors = Vec::new();
    let mut labels = Vec::new();
    for (i, v) in verts.iter().enumerate() {
        let coord = |k: &str| v.get(k).and_then(as_f64).ok_or_else(|| IoError::Format(format!("vertex {i}: bad {k}")));
        points.push(Vec3::new(coord("x")?, coord("y")?, coord("z")?));
        if has_color {
            let ch = |k: &str| {
                v.get(k)
                    .and_then(as_i64)
                    .and_then(|c| u8::try_from(c).ok())
                    .ok_or_else(|| IoError::Format(format!("vertex {i}: bad {k}")))
            };
            colors.push([ch("red")?, ch("green")?, ch("blue")?]);
        }
        if has_label {
            let l = v
                .get("instance_id")
                .and_then(as_i64)
                .and_then(|l| i32::try_from(l).ok())
                .ok_or_else(|| IoError::Format(format!("vertex {i}: bad instance_id")))?;
            labels.push(l);
        }
    }
    let cloud = PointCloud {
        points,
        labels: has_label.then_some(labels),
        colors: has_color.then_some(colors),
    };
    cloud.validate()?;
    Ok(cloud)
}

/// Writes float32 x/y/z plus colors and instance ids when present.
pub fn write_ply(mut writer: impl Write, cloud: &PointCloud, encoding: PlyEncoding) -> Result<(), IoError> {
    cloud.validate()?;
    let mut ply = Ply::<DefaultElement>::new();
    ply.header.encoding = match encoding {
        PlyEncoding::Ascii => Encoding::Ascii,
        PlyEncoding::BinaryLittleEndian => Encoding::BinaryLittleEndian,
    };
    let mut el = ElementDef::new("vertex".to_string());
    let scalar = |name: &str, t: ScalarType| PropertyDef::new(name.to_string(), PropertyType::Scalar(t));
    for k in ["x", "y", "z"] {
        el.properties.add(scalar(k, ScalarType::Float));
    }
    if cloud.colors.is_some() {
        for k in ["red", "green", "blue"] {
            el.properties.add(scalar(k, ScalarType::UChar));
        }
    }
    if cloud.labels.is_some() {
        el.properties.add(scalar("instance_id", ScalarType::Int));
    }
    ply.header.elements.add(el);

    let mut verts = Vec::with_capacity(cloud.len());
    for (i, p) in cloud.points.iter().enumerate() {
        let mut v = DefaultElement::new();
        v.insert("x".to_string(), Property::Float(p.x as f32));
        v.insert("y".to_string(), Property::Float(p.y as f32));
        v.insert("z".to_string(), Property::Float(p.z as f32));
        if let Some(c) = &cloud.colors {
            for (k, val) in ["red", "green", "blue"].iter().zip(c[i]) {
                v.insert(k.to_string(), Property::UChar(val));
            }
        }
        if let Some(l) = &cloud.labels {
            v.insert("instance_id".to_string(), Property::Int(l[i]));
        }
        verts.push(v);
    }
    ply.payload.insert("vertex".to_string(), verts);
    Writer::new().write_ply(&mut writer, &mut ply)?;
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PointCloud {
        PointCloud {
            points: vec![Vec3::new(0.5, -1.25, 2.0), Vec3::new(3.0, 0.0, -0.125)],
            labels: Some(vec![4, -1]),
            colors: Some(vec![[255, 0, 10], [1, 2, 3]]),
        }
    }

    #[test]
    fn round_trip_both_encodings() {
        for enc in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
            let mut buf = Vec::new();
            write_ply(&mut buf, &sample(), enc).unwrap();
            assert_eq!(read_ply(buf.as_slice()).unwrap(), sample(), "{enc:?}");
        }
    }

    #[test]
    fn plain_xyz_and_double_coordinates() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty double x\nproperty double y\nproperty double z\nend_header\n0.1 0.2 0.3\n1 2 3\n";
        let c = read_ply(text.as_bytes()).unwrap();
        assert_eq!(c.points[0], Vec3::new(0.1, 0.2, 0.3));
        assert!(c.labels.is_none() && c.colors.is_none());
    }

    #[test]
    fn missing_coordinate_rejected() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n0 0\n";
        assert!(matches!(read_ply(text.as_bytes()), Err(IoError::Format(_))));
        assert!(read_ply("not a ply".as_bytes()).is_err());
    }
}
