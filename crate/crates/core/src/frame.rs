//! Planar 4:2:0 video data model and raw YUV I/O.
//!
//! Frames are immutable after construction and safe to share across threads.
//! Only 8-bit 4:2:0 is supported; other bit depths are rejected at the I/O
//! boundary rather than silently truncated.

use std::io::{Read, Seek, SeekFrom, Write};

use crate::error::{Error, Result};
use crate::num::round_div;

/// One plane of unsigned 8-bit samples, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plane {
    data: Vec<u8>,
    width: usize,
    height: usize,
}

impl Plane {
    pub fn new(width: usize, height: usize, fill: u8) -> Self {
        Plane {
            data: vec![fill; width * height],
            width,
            height,
        }
    }

    pub fn from_vec(data: Vec<u8>, width: usize, height: usize) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Geometry(format!(
                "plane data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Plane {
            data,
            width,
            height,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    /// Sample at (x, y) with coordinates clamped to the plane bounds.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> u8 {
        let cx = x.clamp(0, self.width as i64 - 1) as usize;
        let cy = y.clamp(0, self.height as i64 - 1) as usize;
        self.data[cy * self.width + cx]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    #[inline]
    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [u8] {
        &mut self.data
    }
}

/// One plane of signed samples, row-major. Carries residuals, grain patterns
/// and other zero-centred data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedPlane {
    data: Vec<i32>,
    width: usize,
    height: usize,
}

impl SignedPlane {
    pub fn new(width: usize, height: usize) -> Self {
        SignedPlane {
            data: vec![0; width * height],
            width,
            height,
        }
    }

    pub fn from_vec(data: Vec<i32>, width: usize, height: usize) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Geometry(format!(
                "plane data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(SignedPlane {
            data,
            width,
            height,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> i32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: i32) {
        self.data[y * self.width + x] = v;
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[i32] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    #[inline]
    pub fn as_slice(&self) -> &[i32] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [i32] {
        &mut self.data
    }
}

/// One picture of planar 4:2:0 samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub y: Plane,
    pub cb: Plane,
    pub cr: Plane,
    bit_depth: u8,
}

impl Frame {
    /// A mid-gray frame of the given luma dimensions. Dimensions must be even.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        check_dimensions(width, height)?;
        Ok(Frame {
            y: Plane::new(width, height, 128),
            cb: Plane::new(width / 2, height / 2, 128),
            cr: Plane::new(width / 2, height / 2, 128),
            bit_depth: 8,
        })
    }

    pub fn from_planes(y: Plane, cb: Plane, cr: Plane) -> Result<Self> {
        check_dimensions(y.width(), y.height())?;
        if cb.width() != y.width() / 2
            || cb.height() != y.height() / 2
            || cr.width() != y.width() / 2
            || cr.height() != y.height() / 2
        {
            return Err(Error::Geometry(format!(
                "chroma planes must be {}x{}",
                y.width() / 2,
                y.height() / 2
            )));
        }
        Ok(Frame {
            y,
            cb,
            cr,
            bit_depth: 8,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.y.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.y.height()
    }

    #[inline]
    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn same_geometry(&self, other: &Frame) -> bool {
        self.width() == other.width() && self.height() == other.height()
    }

    pub(crate) fn check_same_geometry(&self, other: &Frame) -> Result<()> {
        if self.same_geometry(other) {
            Ok(())
        } else {
            Err(Error::Geometry(format!(
                "frame geometry mismatch: {}x{} vs {}x{}",
                self.width(),
                self.height(),
                other.width(),
                other.height()
            )))
        }
    }
}

fn check_dimensions(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Geometry(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    if width % 2 != 0 || height % 2 != 0 {
        return Err(Error::Geometry(format!(
            "4:2:0 requires even dimensions, got {width}x{height}"
        )));
    }
    Ok(())
}

/// Out-of-band geometry of a raw YUV sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceGeometry {
    pub width: usize,
    pub height: usize,
    pub bit_depth: u8,
    pub frame_count: usize,
    /// Frames per second; metadata only.
    pub frame_rate: f64,
}

impl SequenceGeometry {
    pub fn validate(&self) -> Result<()> {
        check_dimensions(self.width, self.height)?;
        if self.bit_depth != 8 {
            return Err(Error::Geometry(format!(
                "only 8-bit input is supported, got {}-bit",
                self.bit_depth
            )));
        }
        if self.frame_count == 0 {
            return Err(Error::Geometry("frame_count must be at least 1".into()));
        }
        Ok(())
    }

    /// Bytes per frame in planar 4:2:0: width*height*3/2.
    pub fn frame_size_bytes(&self) -> usize {
        self.width * self.height * 3 / 2
    }
}

/// Reads the frame at `frame_index` from a raw planar 4:2:0 stream.
/// Planes are stored Y, Cb, Cr, each row-major.
pub fn read_yuv_frame<R: Read + Seek>(
    reader: &mut R,
    geometry: &SequenceGeometry,
    frame_index: usize,
) -> Result<Frame> {
    geometry.validate()?;
    if frame_index >= geometry.frame_count {
        return Err(Error::FrameOutOfRange {
            index: frame_index,
            count: geometry.frame_count,
        });
    }
    let frame_size = geometry.frame_size_bytes();
    reader.seek(SeekFrom::Start((frame_index * frame_size) as u64))?;

    let (w, h) = (geometry.width, geometry.height);
    let mut luma = vec![0u8; w * h];
    let mut cb = vec![0u8; w * h / 4];
    let mut cr = vec![0u8; w * h / 4];
    read_exact_or_range_err(reader, &mut luma, frame_index, geometry.frame_count)?;
    read_exact_or_range_err(reader, &mut cb, frame_index, geometry.frame_count)?;
    read_exact_or_range_err(reader, &mut cr, frame_index, geometry.frame_count)?;

    Frame::from_planes(
        Plane::from_vec(luma, w, h)?,
        Plane::from_vec(cb, w / 2, h / 2)?,
        Plane::from_vec(cr, w / 2, h / 2)?,
    )
}

fn read_exact_or_range_err<R: Read>(
    reader: &mut R,
    buf: &mut [u8],
    index: usize,
    count: usize,
) -> Result<()> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::FrameOutOfRange { index, count }
        } else {
            Error::Io(e)
        }
    })
}

/// Writes the frame as raw planar 4:2:0 and returns the byte count
/// (always width*height*3/2).
pub fn write_yuv_frame<W: Write>(frame: &Frame, sink: &mut W) -> Result<usize> {
    sink.write_all(frame.y.as_slice())?;
    sink.write_all(frame.cb.as_slice())?;
    sink.write_all(frame.cr.as_slice())?;
    Ok(frame.width() * frame.height() * 3 / 2)
}

/// Random-access reader over a raw YUV 4:2:0 stream.
pub struct YuvReader<R: Read + Seek> {
    inner: R,
    geometry: SequenceGeometry,
}

impl<R: Read + Seek> YuvReader<R> {
    pub fn new(inner: R, geometry: SequenceGeometry) -> Result<Self> {
        geometry.validate()?;
        Ok(YuvReader { inner, geometry })
    }

    pub fn geometry(&self) -> &SequenceGeometry {
        &self.geometry
    }

    pub fn read_frame(&mut self, frame_index: usize) -> Result<Frame> {
        read_yuv_frame(&mut self.inner, &self.geometry, frame_index)
    }
}

/// Integer mean of the size x size window at (x, y), clipped at the plane
/// edges: partial windows average the in-bounds samples only. Rounds to
/// nearest, ties up.
pub fn block_average(plane: &Plane, x: usize, y: usize, size: usize) -> Result<u8> {
    if size == 0 {
        return Err(Error::Bounds("block size must be at least 1".into()));
    }
    if x >= plane.width() || y >= plane.height() {
        return Err(Error::Bounds(format!(
            "block origin ({x}, {y}) outside {}x{} plane",
            plane.width(),
            plane.height()
        )));
    }
    let x1 = (x + size).min(plane.width());
    let y1 = (y + size).min(plane.height());
    let mut sum = 0u64;
    for row in y..y1 {
        for col in x..x1 {
            sum += plane.get(col, row) as u64;
        }
    }
    let count = ((x1 - x) * (y1 - y)) as u64;
    Ok(round_div(sum as i64, count as i64) as u8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn geom(w: usize, h: usize, n: usize) -> SequenceGeometry {
        SequenceGeometry {
            width: w,
            height: h,
            bit_depth: 8,
            frame_count: n,
            frame_rate: 25.0,
        }
    }

    #[test]
    fn reads_planar_2x2() {
        let bytes = vec![10u8, 20, 30, 40, 128, 128];
        let f = read_yuv_frame(&mut Cursor::new(&bytes), &geom(2, 2, 1), 0).unwrap();
        assert_eq!(f.y.row(0), &[10, 20]);
        assert_eq!(f.y.row(1), &[30, 40]);
        assert_eq!(f.cb.get(0, 0), 128);
        assert_eq!(f.cr.get(0, 0), 128);
    }

    #[test]
    fn write_read_round_trip_2x2() {
        let bytes = vec![10u8, 20, 30, 40, 128, 128];
        let f = read_yuv_frame(&mut Cursor::new(&bytes), &geom(2, 2, 1), 0).unwrap();
        let mut out = Vec::new();
        let n = write_yuv_frame(&f, &mut out).unwrap();
        assert_eq!(n, 6);
        assert_eq!(out, bytes);
    }

    #[test]
    fn index_at_frame_count_is_out_of_range() {
        let bytes = vec![0u8; 6];
        let err = read_yuv_frame(&mut Cursor::new(&bytes), &geom(2, 2, 1), 1).unwrap_err();
        assert!(matches!(
            err,
            Error::FrameOutOfRange { index: 1, count: 1 }
        ));
    }

    #[test]
    fn full_hd_frame_has_expected_luma_sample_count() {
        // 1920*1080*3/2 bytes carry one frame; luma plane is 1920*1080.
        let g = geom(1920, 1080, 1);
        assert_eq!(g.frame_size_bytes(), 3_110_400);
        let bytes = vec![7u8; 3_110_400];
        let f = read_yuv_frame(&mut Cursor::new(&bytes), &g, 0).unwrap();
        assert_eq!(f.y.as_slice().len(), 2_073_600);
    }

    #[test]
    fn odd_dimensions_rejected() {
        let err = read_yuv_frame(&mut Cursor::new(vec![0u8; 100]), &geom(3, 2, 1), 0).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }

    #[test]
    fn ten_bit_rejected() {
        let mut g = geom(2, 2, 1);
        g.bit_depth = 10;
        let err = read_yuv_frame(&mut Cursor::new(vec![0u8; 12]), &g, 0).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }

    #[test]
    fn block_average_constant() {
        let p = Plane::new(16, 16, 77);
        assert_eq!(block_average(&p, 0, 0, 8).unwrap(), 77);
    }

    #[test]
    fn block_average_rounds_ties_up() {
        let p = Plane::from_vec(vec![0, 0, 255, 255], 2, 2).unwrap();
        // (0+0+255+255)/4 = 127.5 -> 128
        assert_eq!(block_average(&p, 0, 0, 2).unwrap(), 128);
    }

    #[test]
    fn block_average_partial_window_matches_brute_force() {
        let mut p = Plane::new(12, 12, 0);
        for y in 0..12 {
            for x in 0..12 {
                p.set(x, y, ((x * 31 + y * 17) % 251) as u8);
            }
        }
        // Window at (8, 4) of size 8 covers only 4x8 in-bounds samples.
        let mut sum = 0u32;
        let mut cnt = 0u32;
        for y in 4..12 {
            for x in 8..12 {
                sum += p.get(x, y) as u32;
                cnt += 1;
            }
        }
        let expect = ((sum as f64 / cnt as f64) + 0.5).floor() as u8;
        assert_eq!(cnt, 32);
        assert_eq!(block_average(&p, 8, 4, 8).unwrap(), expect);
    }

    #[test]
    fn block_average_origin_out_of_bounds() {
        let p = Plane::new(8, 8, 0);
        assert!(block_average(&p, 8, 0, 4).is_err());
    }
}
