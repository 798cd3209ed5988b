//! Canonical Huffman code derivation and decoding (T.81 Annex C / F.2.2.3).

use alloc::vec::Vec;

use super::bits::{BitReader, BitWriter};
use super::tables::HuffSpec;
use crate::error::{Error, Result};

/// Symbol -> (code, length) map for encoding.
pub struct HuffEncoder {
    code: [u16; 256],
    size: [u8; 256],
}

impl HuffEncoder {
    pub fn new(spec: &HuffSpec) -> Self {
        let (sizes, codes) = derive_codes(&spec.bits);
        let mut enc = HuffEncoder {
            code: [0; 256],
            size: [0; 256],
        };
        for (i, &sym) in spec.vals.iter().enumerate() {
            enc.code[sym as usize] = codes[i];
            enc.size[sym as usize] = sizes[i];
        }
        enc
    }

    pub fn emit(&self, w: &mut BitWriter, symbol: u8) {
        let size = self.size[symbol as usize];
        debug_assert!(size > 0, "symbol {symbol} has no code");
        w.put(self.code[symbol as usize] as u32, size as u32);
    }
}

/// Length-indexed decoding tables.
pub struct HuffDecoder {
    mincode: [i32; 17],
    maxcode: [i32; 17],
    valptr: [usize; 17],
    vals: Vec<u8>,
}

impl HuffDecoder {
    pub fn new(bits: &[u8; 16], vals: &[u8]) -> Result<Self> {
        let total: usize = bits.iter().map(|&b| b as usize).sum();
        if total != vals.len() || total > 256 {
            return Err(Error::Malformed("inconsistent Huffman table"));
        }
        let (_, codes) = derive_codes(bits);
        let mut dec = HuffDecoder {
            mincode: [0; 17],
            maxcode: [-1; 17],
            valptr: [0; 17],
            vals: vals.to_vec(),
        };
        let mut p = 0usize;
        for l in 1..=16 {
            let n = bits[l - 1] as usize;
            if n > 0 {
                dec.valptr[l] = p;
                dec.mincode[l] = codes[p] as i32;
                dec.maxcode[l] = codes[p + n - 1] as i32;
                p += n;
            }
        }
        Ok(dec)
    }

    pub fn decode(&self, r: &mut BitReader) -> Result<u8> {
        let mut code = r.bit()? as i32;
        let mut l = 1usize;
        while self.maxcode[l] < 0 || code > self.maxcode[l] {
            l += 1;
            if l > 16 {
                return Err(Error::Malformed("invalid Huffman code"));
            }
            code = (code << 1) | r.bit()? as i32;
        }
        Ok(self.vals[self.valptr[l] + (code - self.mincode[l]) as usize])
    }
}

/// Generates the canonical (size, code) lists in symbol order.
fn derive_codes(bits: &[u8; 16]) -> (Vec<u8>, Vec<u16>) {
    let mut sizes = Vec::new();
    for (l, &count) in bits.iter().enumerate() {
        for _ in 0..count {
            sizes.push((l + 1) as u8);
        }
    }
    let mut codes = Vec::with_capacity(sizes.len());
    let mut code = 0u16;
    let mut cur = sizes.first().copied().unwrap_or(0);
    for &s in &sizes {
        while cur < s {
            code <<= 1;
            cur += 1;
        }
        codes.push(code);
        code += 1;
    }
    (sizes, codes)
}

/// Magnitude category of a coefficient or DC difference.
pub fn category(v: i32) -> u32 {
    let mut a = v.unsigned_abs();
    let mut bits = 0;
    while a != 0 {
        a >>= 1;
        bits += 1;
    }
    bits
}

/// Low-order bits representing `v` within its category (one's-complement
/// form for negatives).
pub fn magnitude_bits(v: i32, cat: u32) -> u32 {
    if v >= 0 {
        v as u32
    } else {
        (v - 1) as u32 & ((1 << cat) - 1)
    }
}

/// Inverse of [`magnitude_bits`] (the EXTEND procedure).
pub fn extend(bits: u32, cat: u32) -> i32 {
    if cat == 0 {
        return 0;
    }
    let v = bits as i32;
    if v < (1 << (cat - 1)) {
        v - (1 << cat) + 1
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jpeg::tables;

    #[test]
    fn category_and_extend_roundtrip() {
        for v in -2047i32..=2047 {
            let c = category(v);
            if v != 0 {
                assert!(c > 0 && c <= 11);
            }
            assert_eq!(extend(magnitude_bits(v, c), c), v, "value {v}");
        }
        assert_eq!(category(0), 0);
        assert_eq!(category(1), 1);
        assert_eq!(category(-1), 1);
        assert_eq!(category(1023), 10);
        assert_eq!(category(-1024), 11);
    }

    #[test]
    fn encode_decode_roundtrip_over_all_symbols() {
        for spec in [
            &tables::LUMA_DC,
            &tables::CHROMA_DC,
            &tables::LUMA_AC,
            &tables::CHROMA_AC,
        ] {
            let enc = HuffEncoder::new(spec);
            let dec = HuffDecoder::new(&spec.bits, spec.vals).unwrap();
            let mut buf = alloc::vec::Vec::new();
            let mut w = BitWriter::new(&mut buf);
            for &sym in spec.vals {
                enc.emit(&mut w, sym);
            }
            w.finish();
            let mut r = BitReader::new(&buf, 0);
            for &sym in spec.vals {
                assert_eq!(dec.decode(&mut r).unwrap(), sym);
            }
        }
    }

    #[test]
    fn known_annex_k_dc_codes() {
        // the luma DC table assigns 2-bit code 00 to category 0
        let enc = HuffEncoder::new(&tables::LUMA_DC);
        let mut buf = alloc::vec::Vec::new();
        let mut w = BitWriter::new(&mut buf);
        enc.emit(&mut w, 0);
        w.finish();
        assert_eq!(buf, [0b0011_1111]);
    }
}
