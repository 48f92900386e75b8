//! Binary stream container.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "MVSL" | version u16 | width u16 | height u16 | n_frames u32
//! | qp u8 | gop_size u8 | descriptor_len u16 | descriptor UTF-8
//! | seed u64
//! then per frame:
//!   type u8 (0 = I, 1 = P) | macroblock_count u32
//!   then per macroblock:
//!     partition u8 (0 pskip, 1 16x16, 2 16x8, 3 8x16, 4 8x8, 5 intra)
//!     | mv_count u8 | mvs as i16 pairs | mvp as i16 pair
//!     | coeff_count u32 | coefficients as i16 (per-tile zigzag)
//! ```
//!
//! `coeff_count` counts i16 values: 0 for skipped macroblocks, 256 for
//! everything else.

use super::{
    CodecError, CodedFrame, CodedMacroblock, EncodedStream, FrameType, MotionVector,
    PartitionKind, StreamHeader,
};

const MAGIC: &[u8; 4] = b"MVSL";
const VERSION: u16 = 1;
const COEFFS_PER_MB: usize = 256;

/// Serialize a stream to the container format.
pub fn serialize(stream: &EncodedStream) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&stream.header.width.to_le_bytes());
    out.extend_from_slice(&stream.header.height.to_le_bytes());
    out.extend_from_slice(&stream.header.n_frames.to_le_bytes());
    out.push(stream.header.qp);
    out.push(stream.header.gop_size);
    let descriptor = stream.header.embedder.as_deref().unwrap_or("");
    out.extend_from_slice(&(descriptor.len() as u16).to_le_bytes());
    out.extend_from_slice(descriptor.as_bytes());
    out.extend_from_slice(&stream.header.seed.to_le_bytes());

    for frame in &stream.frames {
        out.push(match frame.frame_type {
            FrameType::I => 0,
            FrameType::P => 1,
        });
        out.extend_from_slice(&(frame.macroblocks.len() as u32).to_le_bytes());
        for mb in &frame.macroblocks {
            out.push(mb.partition.code());
            out.push(mb.mvs.len() as u8);
            for mv in &mb.mvs {
                out.extend_from_slice(&mv.h.to_le_bytes());
                out.extend_from_slice(&mv.v.to_le_bytes());
            }
            out.extend_from_slice(&mb.mvp.h.to_le_bytes());
            out.extend_from_slice(&mb.mvp.v.to_le_bytes());
            out.extend_from_slice(&(mb.coeffs.len() as u32).to_le_bytes());
            for c in &mb.coeffs {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CodecError> {
        if self.pos + n > self.bytes.len() {
            return Err(CodecError::malformed(
                self.pos,
                format!("unexpected end of stream reading {what}"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, CodecError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn i16(&mut self, what: &str) -> Result<i16, CodecError> {
        Ok(i16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Parse and validate a container.
pub fn deserialize(bytes: &[u8]) -> Result<EncodedStream, CodecError> {
    let mut r = Reader { bytes, pos: 0 };

    if r.take(4, "magic")? != MAGIC {
        return Err(CodecError::MagicMismatch);
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(CodecError::VersionUnsupported(version));
    }

    let width = r.u16("width")?;
    let height = r.u16("height")?;
    if width == 0 || height == 0 || width % 16 != 0 || height % 16 != 0 {
        return Err(CodecError::malformed(r.pos - 4, "dimensions not macroblock aligned"));
    }
    let n_frames = r.u32("frame count")?;
    if n_frames < 2 {
        return Err(CodecError::malformed(r.pos - 4, "fewer than 2 frames"));
    }
    let qp_pos = r.pos;
    let qp = r.u8("qp")?;
    if qp > 51 {
        return Err(CodecError::malformed(qp_pos, "qp outside [0, 51]"));
    }
    let gop_pos = r.pos;
    let gop_size = r.u8("gop size")?;
    if gop_size == 0 {
        return Err(CodecError::malformed(gop_pos, "zero gop size"));
    }
    let desc_len = r.u16("descriptor length")? as usize;
    let desc_pos = r.pos;
    let desc_bytes = r.take(desc_len, "descriptor")?;
    let descriptor = std::str::from_utf8(desc_bytes)
        .map_err(|_| CodecError::malformed(desc_pos, "descriptor is not UTF-8"))?
        .to_string();
    let seed = r.u64("seed")?;

    let expected_mbs = (width as usize / 16) * (height as usize / 16);
    let mut frames = Vec::with_capacity(n_frames as usize);
    for f in 0..n_frames {
        let ft_pos = r.pos;
        let frame_type = match r.u8("frame type")? {
            0 => FrameType::I,
            1 => FrameType::P,
            _ => return Err(CodecError::malformed(ft_pos, "unknown frame type")),
        };
        let count_pos = r.pos;
        let mb_count = r.u32("macroblock count")? as usize;
        if mb_count != expected_mbs {
            return Err(CodecError::malformed(
                count_pos,
                format!("frame {f}: {mb_count} macroblocks, expected {expected_mbs}"),
            ));
        }
        let mut macroblocks = Vec::with_capacity(mb_count);
        for _ in 0..mb_count {
            let part_pos = r.pos;
            let partition = PartitionKind::from_code(r.u8("partition")?)
                .ok_or_else(|| CodecError::malformed(part_pos, "unknown partition code"))?;
            let mv_count_pos = r.pos;
            let mv_count = r.u8("mv count")? as usize;
            if mv_count != partition.mv_count() {
                return Err(CodecError::malformed(
                    mv_count_pos,
                    format!("{partition} macroblock with {mv_count} MVs"),
                ));
            }
            let mut mvs = Vec::with_capacity(mv_count);
            for _ in 0..mv_count {
                let h = r.i16("mv")?;
                let v = r.i16("mv")?;
                mvs.push(MotionVector::new(h, v));
            }
            let mvp = MotionVector::new(r.i16("mvp")?, r.i16("mvp")?);
            let len_pos = r.pos;
            let coeff_count = r.u32("coefficient count")? as usize;
            let expected =
                if partition == PartitionKind::PSkip { 0 } else { COEFFS_PER_MB };
            if coeff_count != expected {
                return Err(CodecError::malformed(
                    len_pos,
                    format!("{partition} macroblock with {coeff_count} coefficients"),
                ));
            }
            let mut coeffs = Vec::with_capacity(coeff_count);
            for _ in 0..coeff_count {
                coeffs.push(r.i16("coefficient")?);
            }
            macroblocks.push(CodedMacroblock { partition, mvs, mvp, coeffs });
        }
        frames.push(CodedFrame { frame_type, macroblocks });
    }
    if r.pos != bytes.len() {
        return Err(CodecError::malformed(r.pos, "trailing bytes after last frame"));
    }

    Ok(EncodedStream {
        header: StreamHeader {
            width,
            height,
            n_frames,
            qp,
            gop_size,
            embedder: (!descriptor.is_empty()).then_some(descriptor),
            seed,
        },
        frames,
    })
}
