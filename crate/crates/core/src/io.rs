//! NIfTI-1 reading and writing (`.nii` and `.nii.gz`).
//!
//! Scans and filter responses are stored as 32-bit floats, masks as unsigned
//! bytes. Hyper-volumes are 4D files with the channel on the fourth axis.
//! Only the voxel spacing (`pixdim`) and the origin are interpreted from the
//! spatial transform; orientation beyond axis order is ignored.

use std::path::Path;

use ndarray::{Array, ArrayD, ShapeBuilder};
use nifti::writer::WriterOptions;
use nifti::{IntoNdArray, NiftiHeader, NiftiObject, ReaderOptions};

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Geometry, HyperVolume, Volume};
use crate::Real;

struct Loaded {
    geom: Geometry,
    channels: usize,
    rank: usize,
    /// x fastest, then y, z, channel.
    data: Vec<f64>,
}

fn load(path: &Path) -> Result<Loaded> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file does not exist"),
        ));
    }
    let nifti_err = |source| Error::Nifti { path: path.to_path_buf(), source };
    let obj = ReaderOptions::new().read_file(path).map_err(nifti_err)?;
    let header = obj.header().clone();
    let rank = header.dim[0] as usize;
    if !(1..=7).contains(&rank) {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("dim[0] = {rank} is out of range"),
        });
    }
    let dim_at = |i: usize| if i <= rank { header.dim[i].max(1) as usize } else { 1 };
    if (5..=rank).any(|i| header.dim[i] > 1) {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: "volumes above 4 dimensions are not supported".into(),
        });
    }
    let dims = [dim_at(1), dim_at(2), dim_at(3)];
    let channels = dim_at(4);
    let mut spacing = [0.0; 3];
    for (a, s) in spacing.iter_mut().enumerate() {
        let p = header.pixdim[a + 1] as f64;
        // Axes beyond the stored rank carry no meaningful pitch.
        *s = if a + 1 > rank && !(p.is_finite() && p > 0.0) { 1.0 } else { p };
    }
    let geom = Geometry::new(dims, spacing, origin_of(&header)).map_err(|e| {
        Error::MalformedHeader { path: path.to_path_buf(), reason: e.to_string() }
    })?;

    let arr: ArrayD<f64> = obj.into_volume().into_ndarray::<f64>().map_err(nifti_err)?;
    // Reversing the axes makes logical iteration order x-fastest.
    let data: Vec<f64> = arr.t().iter().copied().collect();
    if data.len() != geom.len() * channels {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("expected {} voxels, found {}", geom.len() * channels, data.len()),
        });
    }
    let bad = data.iter().filter(|v| !v.is_finite()).count();
    if bad > 0 {
        return Err(Error::NonFinite { count: bad });
    }
    Ok(Loaded { geom, channels, rank, data })
}

fn origin_of(h: &NiftiHeader) -> [f64; 3] {
    if h.sform_code > 0 {
        [h.srow_x[3] as f64, h.srow_y[3] as f64, h.srow_z[3] as f64]
    } else if h.qform_code > 0 {
        [h.quatern_x as f64, h.quatern_y as f64, h.quatern_z as f64]
    } else {
        [0.0; 3]
    }
}

fn header_for(geom: &Geometry) -> NiftiHeader {
    let [sx, sy, sz] = geom.spacing;
    let [ox, oy, oz] = geom.origin;
    let mut h = NiftiHeader::default();
    h.pixdim = [1.0, sx as f32, sy as f32, sz as f32, 1.0, 1.0, 1.0, 1.0];
    // mm, seconds
    h.xyzt_units = 2 | 8;
    h.qform_code = 1;
    h.sform_code = 1;
    h.quatern_b = 0.0;
    h.quatern_c = 0.0;
    h.quatern_d = 0.0;
    h.quatern_x = ox as f32;
    h.quatern_y = oy as f32;
    h.quatern_z = oz as f32;
    h.srow_x = [sx as f32, 0.0, 0.0, ox as f32];
    h.srow_y = [0.0, sy as f32, 0.0, oy as f32];
    h.srow_z = [0.0, 0.0, sz as f32, oz as f32];
    h
}

fn writer<'a>(path: &'a Path, header: &'a NiftiHeader) -> WriterOptions<'a> {
    let gz = path.extension().map(|e| e == "gz").unwrap_or(false);
    WriterOptions::new(path).reference_header(header).compress(gz)
}

fn write_err(path: &Path) -> impl FnOnce(nifti::NiftiError) -> Error + '_ {
    move |source| match source {
        nifti::NiftiError::Io(e) => Error::io(path, e),
        other => Error::Nifti { path: path.to_path_buf(), source: other },
    }
}

/// Reads a single-channel volume, applying `scl_slope` / `scl_inter`.
pub fn read_volume<T: Real>(path: impl AsRef<Path>) -> Result<Volume<T>> {
    let path = path.as_ref();
    let l = load(path)?;
    if l.channels > 1 {
        return Err(Error::Unexpected4D { path: path.to_path_buf(), channels: l.channels });
    }
    Volume::new(l.geom, l.data.into_iter().map(T::lit).collect())
}

/// Writes a volume as 32-bit float.
pub fn write_volume<T: Real>(vol: &Volume<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let [nx, ny, nz] = vol.dims();
    let data: Vec<f32> = vol.data().iter().map(|v| v.to_f32().unwrap_or(0.0)).collect();
    let arr = Array::from_shape_vec((nx, ny, nz).f(), data).expect("shape matches geometry");
    let header = header_for(vol.geometry());
    writer(path, &header).write_nifti(&arr).map_err(write_err(path))
}

/// Reads a mask; any non-zero voxel becomes foreground.
pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let l = load(path)?;
    if l.channels > 1 {
        return Err(Error::Unexpected4D { path: path.to_path_buf(), channels: l.channels });
    }
    BinaryMask::new(l.geom, l.data.iter().map(|&v| (v != 0.0) as u8).collect())
}

/// Writes a mask as unsigned 8-bit.
pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let [nx, ny, nz] = mask.dims();
    let arr = Array::from_shape_vec((nx, ny, nz).f(), mask.data().to_vec())
        .expect("shape matches geometry");
    let header = header_for(mask.geometry());
    writer(path, &header).write_nifti(&arr).map_err(write_err(path))
}

/// Reads a 4D file; channels are named `channel_<i>` until a sidecar renames them.
pub fn read_hypervolume<T: Real>(path: impl AsRef<Path>) -> Result<HyperVolume<T>> {
    let path = path.as_ref();
    let l = load(path)?;
    if l.rank != 4 {
        return Err(Error::NotHyperVolume { path: path.to_path_buf(), rank: l.rank });
    }
    let n = l.geom.len();
    let mut channels = Vec::with_capacity(l.channels);
    for c in 0..l.channels {
        let data = l.data[c * n..(c + 1) * n].iter().map(|&v| T::lit(v)).collect();
        channels.push(Volume::new(l.geom, data)?);
    }
    let names = (0..l.channels).map(|i| format!("channel_{i}")).collect();
    HyperVolume::new(channels, names)
}

/// Writes all channels as one 4D float file (`dim[4]` = channel count).
pub fn write_hypervolume<T: Real>(hv: &HyperVolume<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let g = *hv.geometry();
    for (c, name) in hv.channels().iter().zip(hv.channel_names()) {
        g.ensure_matches(c.geometry(), &format!("channel {name}"))?;
    }
    let [nx, ny, nz] = g.dims;
    let nc = hv.num_channels();
    let mut data = Vec::with_capacity(g.len() * nc);
    for c in hv.channels() {
        data.extend(c.data().iter().map(|v| v.to_f32().unwrap_or(0.0)));
    }
    let arr = Array::from_shape_vec((nx, ny, nz, nc).f(), data).expect("shape matches geometry");
    let header = header_for(&g);
    writer(path, &header).write_nifti(&arr).map_err(write_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(dims: [usize; 3], spacing: [f64; 3]) -> Geometry {
        Geometry::new(dims, spacing, [0.0; 3]).unwrap()
    }

    #[test]
    fn cubic_roundtrip_keeps_dims() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.nii.gz");
        let g = geom([64, 64, 64], [1.0; 3]);
        let v = Volume::<f64>::from_fn(g, |x, y, z| (x + 2 * y + 3 * z) as f64);
        write_volume(&v, &p).unwrap();
        let r: Volume<f64> = read_volume(&p).unwrap();
        assert_eq!(r.dims(), [64, 64, 64]);
        assert_eq!(r, v);
    }

    #[test]
    fn anisotropic_spacing_preserved() {
        let dir = tempfile::tempdir().unwrap();
        for sp in [[0.65, 0.65, 1.5], [0.51, 0.51, 0.80]] {
            let p = dir.path().join("s.nii");
            let v = Volume::<f32>::zeros(geom([4, 5, 6], sp));
            write_volume(&v, &p).unwrap();
            let r: Volume<f32> = read_volume(&p).unwrap();
            for a in 0..3 {
                assert!((r.spacing()[a] - sp[a]).abs() <= 1e-6, "{:?}", r.spacing());
            }
        }
    }

    #[test]
    fn negative_intensities_survive() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ct.nii.gz");
        let v = Volume::<f64>::from_fn(geom([3, 3, 3], [1.0; 3]), |x, _, _| -1000.0 + x as f64);
        write_volume(&v, &p).unwrap();
        let r: Volume<f64> = read_volume(&p).unwrap();
        assert_eq!(r.get(0, 1, 1), -1000.0);
        assert_eq!(r.get(2, 0, 0), -998.0);
    }

    #[test]
    fn origin_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.nii");
        let g = Geometry::new([2, 2, 2], [1.0; 3], [-10.5, 3.25, 7.0]).unwrap();
        write_volume(&Volume::<f32>::zeros(g), &p).unwrap();
        let r: Volume<f32> = read_volume(&p).unwrap();
        assert_eq!(r.geometry().origin, [-10.5, 3.25, 7.0]);
    }

    #[test]
    fn scl_slope_and_inter_are_applied() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scaled.nii");
        let mask = BinaryMask::new(geom([2, 1, 1], [1.0; 3]), vec![0, 1]).unwrap();
        write_mask(&mask, &p).unwrap();
        // Patch the stored byte and the scaling fields of the uncompressed file.
        let mut bytes = std::fs::read(&p).unwrap();
        let le = i32::from_le_bytes(bytes[0..4].try_into().unwrap()) == 348;
        let enc = |v: f32| if le { v.to_le_bytes() } else { v.to_be_bytes() };
        bytes[112..116].copy_from_slice(&enc(2.0));
        bytes[116..120].copy_from_slice(&enc(10.0));
        bytes[352] = 3;
        std::fs::write(&p, bytes).unwrap();
        let r: Volume<f64> = read_volume(&p).unwrap();
        assert_eq!(r.data(), &[16.0, 12.0]);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_volume::<f64>("/nonexistent/nope.nii").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn garbage_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.nii");
        std::fs::write(&p, vec![7u8; 400]).unwrap();
        assert!(read_volume::<f64>(&p).is_err());
    }

    #[test]
    fn nan_voxels_rejected_with_count() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nan.nii");
        let g = geom([3, 1, 1], [1.0; 3]);
        let header = header_for(&g);
        let arr = Array::from_shape_vec((3, 1, 1).f(), vec![1.0f32, f32::NAN, f32::NAN]).unwrap();
        writer(&p, &header).write_nifti(&arr).unwrap();
        match read_volume::<f64>(&p).unwrap_err() {
            Error::NonFinite { count } => assert_eq!(count, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn four_d_routing() {
        let dir = tempfile::tempdir().unwrap();
        let p4 = dir.path().join("hv.nii.gz");
        let g = geom([4, 3, 2], [0.65; 3]);
        let chans: Vec<Volume<f32>> =
            (0..7).map(|c| Volume::from_fn(g, |x, y, z| (c * 100 + x + 4 * y + 12 * z) as f32)).collect();
        let names = (0..7).map(|c| format!("c{c}")).collect();
        let hv = HyperVolume::new(chans, names).unwrap();
        write_hypervolume(&hv, &p4).unwrap();

        assert!(matches!(read_volume::<f32>(&p4), Err(Error::Unexpected4D { channels: 7, .. })));
        let back: HyperVolume<f32> = read_hypervolume(&p4).unwrap();
        assert_eq!(back.num_channels(), 7);
        for (a, b) in back.channels().iter().zip(hv.channels()) {
            assert_eq!(a.data(), b.data());
        }

        let p3 = dir.path().join("v.nii");
        write_volume(&hv.channels()[0], &p3).unwrap();
        assert!(matches!(read_hypervolume::<f32>(&p3), Err(Error::NotHyperVolume { .. })));
    }

    #[test]
    fn single_channel_hypervolume_matches_volume() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("one.nii");
        let g = geom([3, 3, 3], [1.0; 3]);
        let v = Volume::<f32>::from_fn(g, |x, y, z| (x * y + z) as f32);
        write_hypervolume(&HyperVolume::from_volume(v.clone(), "Original"), &p).unwrap();
        let r: Volume<f32> = read_volume(&p).unwrap();
        assert_eq!(r, v);
    }
}
