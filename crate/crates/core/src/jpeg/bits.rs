//! Entropy-coded segment bit I/O with 0xFF byte stuffing.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// MSB-first bit writer. Emitted 0xFF bytes are followed by a stuffed 0x00.
pub struct BitWriter<'a> {
    out: &'a mut Vec<u8>,
    acc: u32,
    filled: u32,
}

impl<'a> BitWriter<'a> {
    pub fn new(out: &'a mut Vec<u8>) -> Self {
        Self {
            out,
            acc: 0,
            filled: 0,
        }
    }

    pub fn put(&mut self, bits: u32, count: u32) {
        debug_assert!(count <= 16);
        debug_assert!(count == 32 || bits < (1 << count));
        self.acc |= bits << (32 - self.filled - count);
        self.filled += count;
        while self.filled >= 8 {
            let byte = (self.acc >> 24) as u8;
            self.out.push(byte);
            if byte == 0xFF {
                self.out.push(0x00);
            }
            self.acc <<= 8;
            self.filled -= 8;
        }
    }

    /// Pads the final partial byte with 1-bits, as the scan syntax requires.
    pub fn finish(mut self) {
        if self.filled > 0 {
            let pad = 8 - self.filled;
            self.put((1 << pad) - 1, pad);
        }
    }
}

/// MSB-first bit reader that unstuffs 0xFF00 and stops at markers.
pub struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    acc: u32,
    available: u32,
    /// Marker code (second byte) seen while refilling, e.g. 0xD9 for EOI.
    marker: Option<u8>,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8], pos: usize) -> Self {
        Self {
            data,
            pos,
            acc: 0,
            available: 0,
            marker: None,
        }
    }

    /// Byte offset of the next unread byte.
    pub fn byte_pos(&self) -> usize {
        self.pos
    }

    fn refill(&mut self) -> Result<()> {
        if self.marker.is_some() {
            return Err(Error::Truncated);
        }
        if self.pos >= self.data.len() {
            return Err(Error::Truncated);
        }
        let byte = self.data[self.pos];
        if byte == 0xFF {
            match self.data.get(self.pos + 1) {
                Some(0x00) => {
                    self.pos += 2;
                }
                Some(&m) => {
                    // a real marker interrupts the entropy stream
                    self.marker = Some(m);
                    return Err(Error::Truncated);
                }
                None => return Err(Error::Truncated),
            }
        } else {
            self.pos += 1;
        }
        self.acc |= (byte as u32) << (24 - self.available);
        self.available += 8;
        Ok(())
    }

    pub fn bit(&mut self) -> Result<u32> {
        if self.available == 0 {
            self.refill()?;
        }
        let b = self.acc >> 31;
        self.acc <<= 1;
        self.available -= 1;
        Ok(b)
    }

    pub fn bits(&mut self, count: u32) -> Result<u32> {
        let mut v = 0;
        for _ in 0..count {
            v = (v << 1) | self.bit()?;
        }
        Ok(v)
    }

    /// Discards buffered bits so reading resumes at a byte boundary.
    pub fn align(&mut self) {
        self.acc = 0;
        self.available = 0;
    }

    /// The marker that interrupted the stream, if any.
    pub fn pending_marker(&self) -> Option<u8> {
        self.marker
    }

    /// Consumes an expected restart marker and resumes after it.
    pub fn consume_restart(&mut self, expected: u8) -> Result<()> {
        self.align();
        // the refill above may already have latched the marker
        if self.marker.is_none() {
            if self.pos + 1 >= self.data.len() {
                return Err(Error::Truncated);
            }
            if self.data[self.pos] != 0xFF {
                return Err(Error::Malformed("missing restart marker"));
            }
            self.marker = Some(self.data[self.pos + 1]);
            self.pos += 2;
        } else {
            self.pos += 2;
        }
        if self.marker != Some(expected) {
            return Err(Error::Malformed("restart marker out of sequence"));
        }
        self.marker = None;
        Ok(())
    }
}
