//! Bit-exact film grain characteristics SEI payload codec and the sidecar
//! transport framing used to move per-frame parameters between CLI stages.
//!
//! Payload syntax (all fields MSB-first):
//!
//! ```text
//! cancel_flag                              u(1)
//! if (!cancel_flag) {
//!   model_id                               u(2)
//!   separate_colour_description_present    u(1)   (always 0 here)
//!   blending_mode_id                       u(2)
//!   log2_scale_factor                      u(4)
//!   comp_model_present[c], c=0..2          u(1) each
//!   for each present c {
//!     interval_count - 1                   u(8)
//!     values_per_interval - 1              u(3)   (always 2 here)
//!     for each interval {
//!       lower_bound                        u(8)
//!       upper_bound                        u(8)
//!       comp_model_value[j], j=0..2        se(v)
//!     }
//!   }
//!   persistence_flag                       u(1)
//! }
//! stop bit 1, then 0s to byte alignment
//! ```
//!
//! The sidecar framing is not an Annex-B stream: no emulation prevention is
//! applied, so these bytes are for this toolchain's own stages, not for
//! conforming video decoders.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::params::{FilmGrainParams, IntensityInterval, FGC_PAYLOAD_TYPE, MODEL_VALUES_PER_INTERVAL};

/// Append-only MSB-first bit writer.
#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bit_pos: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write_bit(&mut self, bit: bool) {
        let byte_index = self.bit_pos / 8;
        if byte_index == self.bytes.len() {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[byte_index] |= 0x80 >> (self.bit_pos % 8);
        }
        self.bit_pos += 1;
    }

    /// Writes the low `width` bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u32, width: u32) {
        for i in (0..width).rev() {
            self.write_bit((value >> i) & 1 == 1);
        }
    }

    /// One stop bit then zeros to the next byte boundary.
    pub fn finish(mut self) -> Vec<u8> {
        self.write_bit(true);
        while self.bit_pos % 8 != 0 {
            self.write_bit(false);
        }
        self.bytes
    }

    pub fn bit_position(&self) -> usize {
        self.bit_pos
    }
}

/// MSB-first bit reader with positioned errors.
#[derive(Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    bit_pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, bit_pos: 0 }
    }

    pub fn bit_position(&self) -> usize {
        self.bit_pos
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        let byte_index = self.bit_pos / 8;
        if byte_index >= self.bytes.len() {
            return Err(Error::parse(self.bit_pos, "payload truncated"));
        }
        let bit = (self.bytes[byte_index] >> (7 - self.bit_pos % 8)) & 1 == 1;
        self.bit_pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, width: u32) -> Result<u32> {
        let mut v = 0u32;
        for _ in 0..width {
            v = (v << 1) | self.read_bit()? as u32;
        }
        Ok(v)
    }
}

/// Writes `value` as unsigned Exp-Golomb.
pub fn write_exp_golomb_unsigned(w: &mut BitWriter, value: u32) {
    let code = value as u64 + 1;
    let bits = 64 - code.leading_zeros();
    for _ in 0..bits - 1 {
        w.write_bit(false);
    }
    for i in (0..bits).rev() {
        w.write_bit((code >> i) & 1 == 1);
    }
}

/// Reads an unsigned Exp-Golomb code.
pub fn read_exp_golomb_unsigned(r: &mut BitReader) -> Result<u32> {
    let mut zeros = 0u32;
    while !r.read_bit()? {
        zeros += 1;
        if zeros > 32 {
            return Err(Error::parse(r.bit_position(), "exp-golomb prefix too long"));
        }
    }
    let mut v = 1u64;
    for _ in 0..zeros {
        v = (v << 1) | r.read_bit()? as u64;
    }
    Ok((v - 1) as u32)
}

/// Writes `value` as signed Exp-Golomb: 0, 1, -1, 2, -2, ... map to
/// code numbers 0, 1, 2, 3, 4, ...
pub fn write_exp_golomb_signed(w: &mut BitWriter, value: i32) {
    let code = if value > 0 {
        2 * value as u32 - 1
    } else {
        2 * value.unsigned_abs()
    };
    write_exp_golomb_unsigned(w, code);
}

/// Reads a signed Exp-Golomb code.
pub fn read_exp_golomb_signed(r: &mut BitReader) -> Result<i32> {
    let code = read_exp_golomb_unsigned(r)?;
    let magnitude = code.div_ceil(2) as i32;
    Ok(if code % 2 == 1 { magnitude } else { -magnitude })
}

fn check_width(field: &'static str, value: i64, width: u32) -> Result<u32> {
    if value < 0 || value >= (1i64 << width) {
        Err(Error::Encode { field, value })
    } else {
        Ok(value as u32)
    }
}

/// Serializes a parameter set into a canonical payload. Intervals need not be
/// disjoint at this level; only field widths are enforced.
pub fn encode_fgc(params: &FilmGrainParams) -> Result<Vec<u8>> {
    let mut w = BitWriter::new();
    w.write_bit(params.cancel_flag);
    if !params.cancel_flag {
        w.write_bits(check_width("model_id", params.model_id as i64, 2)?, 2);
        w.write_bit(false); // separate_colour_description_present_flag
        w.write_bits(
            check_width("blending_mode_id", params.blending_mode_id as i64, 2)?,
            2,
        );
        w.write_bits(
            check_width("log2_scale_factor", params.log2_scale_factor as i64, 4)?,
            4,
        );
        for c in 0..3 {
            w.write_bit(params.comp_model_present[c]);
        }
        for c in 0..3 {
            if !params.comp_model_present[c] {
                continue;
            }
            let n = params.intervals[c].len();
            if n == 0 || n > 256 {
                return Err(Error::Encode {
                    field: "interval_count",
                    value: n as i64,
                });
            }
            w.write_bits((n - 1) as u32, 8);
            w.write_bits((MODEL_VALUES_PER_INTERVAL - 1) as u32, 3);
            for interval in &params.intervals[c] {
                w.write_bits(interval.lower_bound as u32, 8);
                w.write_bits(interval.upper_bound as u32, 8);
                write_exp_golomb_signed(&mut w, interval.scaling_value);
                write_exp_golomb_signed(&mut w, interval.h_cutoff);
                write_exp_golomb_signed(&mut w, interval.v_cutoff);
            }
        }
        w.write_bit(params.persistence_flag);
    }
    Ok(w.finish())
}

/// Parses a payload produced by [`encode_fgc`]. Unknown model ids parse
/// successfully and are rejected later, at synthesis time.
pub fn decode_fgc(bytes: &[u8]) -> Result<FilmGrainParams> {
    let mut r = BitReader::new(bytes);
    let mut params = FilmGrainParams::cancelled();
    params.cancel_flag = r.read_bit()?;
    if !params.cancel_flag {
        params.model_id = r.read_bits(2)? as u8;
        if r.read_bit()? {
            return Err(Error::parse(
                r.bit_position(),
                "separate colour description is not supported",
            ));
        }
        params.blending_mode_id = r.read_bits(2)? as u8;
        params.log2_scale_factor = r.read_bits(4)? as u8;
        for c in 0..3 {
            params.comp_model_present[c] = r.read_bit()?;
        }
        for c in 0..3 {
            if !params.comp_model_present[c] {
                continue;
            }
            let interval_count = r.read_bits(8)? as usize + 1;
            let values_per_interval = r.read_bits(3)? as usize + 1;
            if values_per_interval != MODEL_VALUES_PER_INTERVAL {
                return Err(Error::parse(
                    r.bit_position(),
                    format!("expected 3 model values per interval, got {values_per_interval}"),
                ));
            }
            let mut intervals = Vec::with_capacity(interval_count);
            for _ in 0..interval_count {
                let lower_bound = r.read_bits(8)? as u8;
                let upper_bound = r.read_bits(8)? as u8;
                let scaling_value = read_exp_golomb_signed(&mut r)?;
                let h_cutoff = read_exp_golomb_signed(&mut r)?;
                let v_cutoff = read_exp_golomb_signed(&mut r)?;
                intervals.push(IntensityInterval {
                    lower_bound,
                    upper_bound,
                    scaling_value,
                    h_cutoff,
                    v_cutoff,
                });
            }
            params.intervals[c] = intervals;
        }
        params.persistence_flag = r.read_bit()?;
    }

    // Trailing bits: a single 1 then 0s to the end of the payload.
    if !r.read_bit()? {
        return Err(Error::parse(r.bit_position() - 1, "missing stop bit"));
    }
    while r.bit_position() % 8 != 0 {
        if r.read_bit()? {
            return Err(Error::parse(r.bit_position() - 1, "nonzero alignment bit"));
        }
    }
    if r.bit_position() / 8 != bytes.len() {
        return Err(Error::parse(
            r.bit_position(),
            format!("{} trailing bytes after payload", bytes.len() - r.bit_position() / 8),
        ));
    }
    Ok(params)
}

/// A generic SEI message: payload type plus raw payload bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeiMessage {
    pub payload_type: u32,
    pub payload: Vec<u8>,
}

impl SeiMessage {
    pub fn film_grain(params: &FilmGrainParams) -> Result<Self> {
        Ok(SeiMessage {
            payload_type: FGC_PAYLOAD_TYPE,
            payload: encode_fgc(params)?,
        })
    }
}

fn write_sei_size(out: &mut Vec<u8>, mut value: u32) {
    while value >= 255 {
        out.push(0xFF);
        value -= 255;
    }
    out.push(value as u8);
}

/// Frames a message as (payload_type, payload_size, payload) with the
/// 0xFF-run size coding.
pub fn wrap_sei(message: &SeiMessage) -> Result<Vec<u8>> {
    if message.payload.is_empty() {
        return Err(Error::Encode {
            field: "payload",
            value: 0,
        });
    }
    if message.payload.len() > 1 << 16 {
        return Err(Error::Encode {
            field: "payload_size",
            value: message.payload.len() as i64,
        });
    }
    let mut out = Vec::with_capacity(message.payload.len() + 4);
    write_sei_size(&mut out, message.payload_type);
    write_sei_size(&mut out, message.payload.len() as u32);
    out.extend_from_slice(&message.payload);
    Ok(out)
}

fn read_sei_size(bytes: &[u8], pos: &mut usize) -> Result<u32> {
    let mut value = 0u32;
    loop {
        let b = *bytes
            .get(*pos)
            .ok_or_else(|| Error::parse(*pos * 8, "truncated size field"))?;
        *pos += 1;
        value += b as u32;
        if b != 0xFF {
            return Ok(value);
        }
    }
}

/// Inverse of [`wrap_sei`]. Returns the message and the byte count consumed.
pub fn unwrap_sei(bytes: &[u8]) -> Result<(SeiMessage, usize)> {
    let mut pos = 0usize;
    let payload_type = read_sei_size(bytes, &mut pos)?;
    let payload_size = read_sei_size(bytes, &mut pos)? as usize;
    if payload_size == 0 {
        return Err(Error::parse(pos * 8, "zero-length payload"));
    }
    if bytes.len() < pos + payload_size {
        return Err(Error::parse(
            bytes.len() * 8,
            format!(
                "payload truncated: declared {payload_size} bytes, {} available",
                bytes.len() - pos
            ),
        ));
    }
    let payload = bytes[pos..pos + payload_size].to_vec();
    Ok((
        SeiMessage {
            payload_type,
            payload,
        },
        pos + payload_size,
    ))
}

/// Writes sidecar records: (frame_index u32 big-endian, wrapped SEI message).
pub struct SidecarWriter<W: Write> {
    sink: W,
}

impl<W: Write> SidecarWriter<W> {
    pub fn new(sink: W) -> Self {
        SidecarWriter { sink }
    }

    pub fn write_record(&mut self, frame_index: u32, params: &FilmGrainParams) -> Result<()> {
        let wrapped = wrap_sei(&SeiMessage::film_grain(params)?)?;
        self.sink.write_all(&frame_index.to_be_bytes())?;
        self.sink.write_all(&wrapped)?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.sink
    }
}

/// Reads sidecar records until end of stream.
pub struct SidecarReader<R: Read> {
    source: R,
    byte_offset: usize,
}

impl<R: Read> SidecarReader<R> {
    pub fn new(source: R) -> Self {
        SidecarReader {
            source,
            byte_offset: 0,
        }
    }

    /// Current position in the stream, for error reporting.
    pub fn byte_offset(&self) -> usize {
        self.byte_offset
    }

    fn read_byte(&mut self) -> Result<Option<u8>> {
        let mut b = [0u8; 1];
        let mut read = 0;
        while read < 1 {
            match self.source.read(&mut b[read..]) {
                Ok(0) => {
                    return if read == 0 {
                        Ok(None)
                    } else {
                        Err(Error::parse(self.byte_offset * 8, "truncated record"))
                    }
                }
                Ok(n) => read += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(Error::Io(e)),
            }
        }
        self.byte_offset += 1;
        Ok(Some(b[0]))
    }

    fn read_byte_required(&mut self) -> Result<u8> {
        self.read_byte()?
            .ok_or_else(|| Error::parse(self.byte_offset * 8, "truncated record"))
    }

    fn read_size(&mut self) -> Result<u32> {
        let mut value = 0u32;
        loop {
            let b = self.read_byte_required()?;
            value += b as u32;
            if b != 0xFF {
                return Ok(value);
            }
        }
    }

    /// Next (frame_index, params) record, or `None` at a clean end of stream.
    pub fn read_record(&mut self) -> Result<Option<(u32, FilmGrainParams)>> {
        let first = match self.read_byte()? {
            None => return Ok(None),
            Some(b) => b,
        };
        let mut index_bytes = [first, 0, 0, 0];
        for slot in index_bytes.iter_mut().skip(1) {
            *slot = self.read_byte_required()?;
        }
        let frame_index = u32::from_be_bytes(index_bytes);
        let payload_type = self.read_size()?;
        let payload_size = self.read_size()? as usize;
        if payload_size == 0 || payload_size > 1 << 16 {
            return Err(Error::parse(
                self.byte_offset * 8,
                format!("invalid payload size {payload_size}"),
            ));
        }
        let mut payload = vec![0u8; payload_size];
        for slot in payload.iter_mut() {
            *slot = self.read_byte_required()?;
        }
        if payload_type != FGC_PAYLOAD_TYPE {
            return Err(Error::parse(
                self.byte_offset * 8,
                format!("unexpected SEI payload type {payload_type}"),
            ));
        }
        let params = decode_fgc(&payload)?;
        Ok(Some((frame_index, params)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{BLENDING_MODE_ADDITIVE, MODEL_ID_FREQUENCY_FILTERING};

    fn sample_params() -> FilmGrainParams {
        FilmGrainParams {
            cancel_flag: false,
            model_id: MODEL_ID_FREQUENCY_FILTERING,
            blending_mode_id: BLENDING_MODE_ADDITIVE,
            log2_scale_factor: 5,
            comp_model_present: [true, false, false],
            intervals: [
                vec![
                    IntensityInterval {
                        lower_bound: 0,
                        upper_bound: 127,
                        scaling_value: 40,
                        h_cutoff: 8,
                        v_cutoff: 9,
                    },
                    IntensityInterval {
                        lower_bound: 128,
                        upper_bound: 255,
                        scaling_value: 60,
                        h_cutoff: 8,
                        v_cutoff: 9,
                    },
                ],
                Vec::new(),
                Vec::new(),
            ],
            persistence_flag: false,
        }
    }

    #[test]
    fn cancel_message_is_one_byte() {
        let bytes = encode_fgc(&FilmGrainParams::cancelled()).unwrap();
        assert_eq!(bytes, vec![0b1100_0000]);
        let back = decode_fgc(&bytes).unwrap();
        assert!(back.cancel_flag);
    }

    #[test]
    fn empty_input_is_a_parse_error() {
        assert!(decode_fgc(&[]).is_err());
    }

    #[test]
    fn golden_payload_bytes() {
        // Frozen wire image of `sample_params`, derived field by field from
        // the syntax table in the module docs.
        let bytes = encode_fgc(&sample_params()).unwrap();
        assert_eq!(
            bytes,
            vec![
                0x01, 0x60, 0x0A, 0x00, 0x7F, 0x02, 0x80, 0x40, 0x25, 0x01, 0xFE, 0x07, 0x80,
                0x80, 0x49
            ]
        );
        assert_eq!(decode_fgc(&bytes).unwrap(), sample_params());
    }

    #[test]
    fn round_trip_is_canonical() {
        let p = sample_params();
        let a = encode_fgc(&p).unwrap();
        let decoded = decode_fgc(&a).unwrap();
        assert_eq!(decoded, p);
        let b = encode_fgc(&decoded).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exp_golomb_signed_small_values() {
        let mut w = BitWriter::new();
        write_exp_golomb_signed(&mut w, 0);
        assert_eq!(w.bit_position(), 1); // "1"
        let mut w = BitWriter::new();
        write_exp_golomb_signed(&mut w, 1);
        assert_eq!(w.bit_position(), 3); // "010"
        let bytes = w.finish();
        assert_eq!(bytes[0] >> 5, 0b010);
        let mut w = BitWriter::new();
        write_exp_golomb_signed(&mut w, -1);
        let bytes = w.finish();
        assert_eq!(bytes[0] >> 5, 0b011);
    }

    #[test]
    fn exp_golomb_signed_round_trip() {
        let mut w = BitWriter::new();
        for v in -300..=300 {
            write_exp_golomb_signed(&mut w, v);
        }
        let bytes = w.finish();
        let mut r = BitReader::new(&bytes);
        for v in -300..=300 {
            assert_eq!(read_exp_golomb_signed(&mut r).unwrap(), v);
        }
    }

    #[test]
    fn wrap_sei_small_message() {
        let msg = SeiMessage {
            payload_type: 19,
            payload: vec![0xAB],
        };
        assert_eq!(wrap_sei(&msg).unwrap(), vec![0x13, 0x01, 0xAB]);
    }

    #[test]
    fn wrap_sei_type_300_uses_ff_run() {
        let msg = SeiMessage {
            payload_type: 300,
            payload: vec![0xAB],
        };
        assert_eq!(wrap_sei(&msg).unwrap(), vec![0xFF, 0x2D, 0x01, 0xAB]);
        let (back, used) = unwrap_sei(&wrap_sei(&msg).unwrap()).unwrap();
        assert_eq!(back, msg);
        assert_eq!(used, 4);
    }

    #[test]
    fn truncated_wrap_is_error() {
        let msg = SeiMessage {
            payload_type: 19,
            payload: vec![1, 2, 3, 4],
        };
        let wrapped = wrap_sei(&msg).unwrap();
        assert!(unwrap_sei(&wrapped[..wrapped.len() - 1]).is_err());
    }

    #[test]
    fn sidecar_round_trip() {
        let mut buf = Vec::new();
        {
            let mut w = SidecarWriter::new(&mut buf);
            w.write_record(0, &FilmGrainParams::cancelled()).unwrap();
            w.write_record(1, &sample_params()).unwrap();
        }
        let mut r = SidecarReader::new(buf.as_slice());
        let (i0, p0) = r.read_record().unwrap().unwrap();
        assert_eq!(i0, 0);
        assert!(p0.cancel_flag);
        let (i1, p1) = r.read_record().unwrap().unwrap();
        assert_eq!(i1, 1);
        assert_eq!(p1, sample_params());
        assert!(r.read_record().unwrap().is_none());
    }

    #[test]
    fn sidecar_truncation_is_error_with_offset() {
        let mut buf = Vec::new();
        SidecarWriter::new(&mut buf)
            .write_record(3, &sample_params())
            .unwrap();
        let mut r = SidecarReader::new(&buf[..buf.len() - 2]);
        assert!(r.read_record().is_err());
    }
}
