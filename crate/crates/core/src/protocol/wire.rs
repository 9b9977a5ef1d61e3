//! Binary message encoding.
//!
//! Every message is one tag byte followed by its fields in a fixed order.
//! Each field is a `u32` big-endian length and the raw bytes; integers are
//! carried as 8-byte big-endian fields and strings as UTF-8. Nested
//! structures (a pseudonym inside M1, the hybrid ciphertext inside a
//! pseudonym) are encoded the same way and embedded as a single field.

use super::crypto::{Nonce, SymKey, TemporaryId};
use super::ProtocolError;

pub const TAG_ENROLL_REQUEST: u8 = 0x01;
pub const TAG_ENROLL_RESPONSE: u8 = 0x02;
pub const TAG_PSEUDONYM: u8 = 0x10;
pub const TAG_M1: u8 = 0x11;
pub const TAG_M2: u8 = 0x12;
pub const TAG_M3: u8 = 0x13;
pub const TAG_M4: u8 = 0x14;
pub const TAG_REFUSAL: u8 = 0x1F;
pub const TAG_HYBRID: u8 = 0x20;
pub const TAG_RANDOM_FACE: u8 = 0x21;
pub const TAG_RESP_C: u8 = 0x22;

/// Builder for one tagged record.
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(tag: u8) -> Self {
        Self { buf: vec![tag] }
    }

    pub fn bytes(mut self, b: &[u8]) -> Self {
        let len = u32::try_from(b.len()).expect("field shorter than 4 GiB");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(b);
        self
    }

    pub fn str(self, s: &str) -> Self {
        self.bytes(s.as_bytes())
    }

    pub fn u64(self, v: u64) -> Self {
        self.bytes(&v.to_be_bytes())
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Cursor over one tagged record; [`Reader::end`] rejects trailing bytes.
pub struct Reader<'a> {
    rest: &'a [u8],
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], tag: u8, what: &'static str) -> Result<Self, ProtocolError> {
        match buf.split_first() {
            Some((&t, rest)) if t == tag => Ok(Self { rest, what }),
            Some((&t, _)) => Err(wire(what, format!("unexpected tag 0x{t:02x}"))),
            None => Err(wire(what, "empty buffer".into())),
        }
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], ProtocolError> {
        if self.rest.len() < 4 {
            return Err(wire(self.what, "truncated length prefix".into()));
        }
        let (len, rest) = self.rest.split_at(4);
        let len = u32::from_be_bytes(len.try_into().expect("4 bytes")) as usize;
        if rest.len() < len {
            return Err(wire(self.what, format!("field of {len} bytes truncated")));
        }
        let (field, rest) = rest.split_at(len);
        self.rest = rest;
        Ok(field)
    }

    pub fn fixed<const N: usize>(&mut self) -> Result<[u8; N], ProtocolError> {
        let b = self.bytes()?;
        b.try_into()
            .map_err(|_| wire(self.what, format!("expected {N}-byte field, got {}", b.len())))
    }

    pub fn str(&mut self) -> Result<String, ProtocolError> {
        let b = self.bytes()?;
        String::from_utf8(b.to_vec()).map_err(|_| wire(self.what, "invalid UTF-8".into()))
    }

    pub fn u64(&mut self) -> Result<u64, ProtocolError> {
        Ok(u64::from_be_bytes(self.fixed::<8>()?))
    }

    pub fn tid(&mut self) -> Result<TemporaryId, ProtocolError> {
        Ok(TemporaryId(self.fixed()?))
    }

    pub fn nonce(&mut self) -> Result<Nonce, ProtocolError> {
        Ok(Nonce(self.fixed()?))
    }

    pub fn key(&mut self) -> Result<SymKey, ProtocolError> {
        Ok(SymKey(self.fixed()?))
    }

    pub fn end(self) -> Result<(), ProtocolError> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(wire(self.what, format!("{} trailing bytes", self.rest.len())))
        }
    }
}

fn wire(what: &'static str, detail: String) -> ProtocolError {
    ProtocolError::Wire { what, detail }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_tag_then_length_prefixed_fields() {
        let b = Writer::new(0x42).bytes(b"ab").u64(1).str("").finish();
        assert_eq!(
            b,
            [
                &[0x42][..],
                &[0, 0, 0, 2, b'a', b'b'],
                &[0, 0, 0, 8, 0, 0, 0, 0, 0, 0, 0, 1],
                &[0, 0, 0, 0],
            ]
            .concat()
        );
    }

    #[test]
    fn reader_rejects_malformed() {
        let good = Writer::new(1).bytes(b"xyz").finish();
        assert!(Reader::new(&good, 2, "t").is_err());
        assert!(Reader::new(&[], 1, "t").is_err());
        let mut r = Reader::new(&good[..good.len() - 1], 1, "t").unwrap();
        assert!(r.bytes().is_err());
        let mut trailing = good.clone();
        trailing.push(0);
        let mut r = Reader::new(&trailing, 1, "t").unwrap();
        r.bytes().unwrap();
        assert!(r.end().is_err());
        let mut r = Reader::new(&good, 1, "t").unwrap();
        assert!(r.fixed::<4>().is_err());
    }

    proptest! {
        #[test]
        fn fields_round_trip(fields in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..40), 0..6)) {
            let mut w = Writer::new(9);
            for f in &fields {
                w = w.bytes(f);
            }
            let buf = w.finish();
            let mut r = Reader::new(&buf, 9, "t").unwrap();
            for f in &fields {
                prop_assert_eq!(r.bytes().unwrap(), f.as_slice());
            }
            prop_assert!(r.end().is_ok());
        }
    }
}
