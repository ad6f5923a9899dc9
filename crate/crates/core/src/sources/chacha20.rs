//! ChaCha20 keystream (RFC 8439): 256-bit key, 96-bit nonce, 32-bit block counter.

use rand_core::{impls, RngCore};

const CONSTANTS: [u32; 4] = [0x6170_7865, 0x3320_646e, 0x7962_2d32, 0x6b20_6574];

pub const BLOCK_LEN: usize = 64;

#[inline(always)]
fn quarter_round(s: &mut [u32; 16], a: usize, b: usize, c: usize, d: usize) {
    s[a] = s[a].wrapping_add(s[b]);
    s[d] = (s[d] ^ s[a]).rotate_left(16);
    s[c] = s[c].wrapping_add(s[d]);
    s[b] = (s[b] ^ s[c]).rotate_left(12);
    s[a] = s[a].wrapping_add(s[b]);
    s[d] = (s[d] ^ s[a]).rotate_left(8);
    s[c] = s[c].wrapping_add(s[d]);
    s[b] = (s[b] ^ s[c]).rotate_left(7);
}

/// One 64-byte keystream block.
pub fn block(key: &[u8; 32], nonce: &[u8; 12], counter: u32) -> [u8; BLOCK_LEN] {
    let mut state = [0u32; 16];
    state[..4].copy_from_slice(&CONSTANTS);
    for (i, word) in key.chunks_exact(4).enumerate() {
        state[4 + i] = u32::from_le_bytes(word.try_into().unwrap());
    }
    state[12] = counter;
    for (i, word) in nonce.chunks_exact(4).enumerate() {
        state[13 + i] = u32::from_le_bytes(word.try_into().unwrap());
    }

    let mut working = state;
    for _ in 0..10 {
        quarter_round(&mut working, 0, 4, 8, 12);
        quarter_round(&mut working, 1, 5, 9, 13);
        quarter_round(&mut working, 2, 6, 10, 14);
        quarter_round(&mut working, 3, 7, 11, 15);
        quarter_round(&mut working, 0, 5, 10, 15);
        quarter_round(&mut working, 1, 6, 11, 12);
        quarter_round(&mut working, 2, 7, 8, 13);
        quarter_round(&mut working, 3, 4, 9, 14);
    }

    let mut out = [0u8; BLOCK_LEN];
    for (i, (w, s)) in working.iter().zip(state.iter()).enumerate() {
        out[4 * i..4 * i + 4].copy_from_slice(&w.wrapping_add(*s).to_le_bytes());
    }
    out
}

/// Sequential keystream reader.
///
/// Production streams use an all-zero nonce and start at block counter 1, so
/// the output is a pure function of the 32-byte key.
/// [`ChaCha20Stream::with_nonce`] exists for checking against published vectors.
#[derive(Clone)]
pub struct ChaCha20Stream {
    key: [u8; 32],
    nonce: [u8; 12],
    counter: u32,
    buf: [u8; BLOCK_LEN],
    pos: usize,
}

impl ChaCha20Stream {
    pub fn new(key: [u8; 32]) -> Self {
        Self::with_nonce(key, [0; 12], 1)
    }

    pub fn with_nonce(key: [u8; 32], nonce: [u8; 12], counter: u32) -> Self {
        Self {
            key,
            nonce,
            counter,
            buf: [0; BLOCK_LEN],
            pos: BLOCK_LEN,
        }
    }

    fn refill(&mut self) {
        self.buf = block(&self.key, &self.nonce, self.counter);
        // 2^32 blocks = 256 GiB per key; wrapping is far beyond any use here
        self.counter = self.counter.wrapping_add(1);
        self.pos = 0;
    }

    pub fn fill(&mut self, dest: &mut [u8]) {
        let mut written = 0;
        while written < dest.len() {
            if self.pos == BLOCK_LEN {
                self.refill();
            }
            let n = (BLOCK_LEN - self.pos).min(dest.len() - written);
            dest[written..written + n].copy_from_slice(&self.buf[self.pos..self.pos + n]);
            self.pos += n;
            written += n;
        }
    }

    pub fn take_bytes(&mut self, n: usize) -> Vec<u8> {
        let mut out = vec![0u8; n];
        self.fill(&mut out);
        out
    }
}

impl RngCore for ChaCha20Stream {
    fn next_u32(&mut self) -> u32 {
        impls::next_u32_via_fill(self)
    }

    fn next_u64(&mut self) -> u64 {
        impls::next_u64_via_fill(self)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.fill(dest);
    }
}

/// `nbytes` of keystream under `key` with the production nonce/counter convention.
pub fn chacha20_stream(key: &[u8; 32], nbytes: usize) -> Vec<u8> {
    ChaCha20Stream::new(*key).take_bytes(nbytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hex_bytes(s: &str) -> Vec<u8> {
        hex::decode(s.split_whitespace().collect::<String>()).unwrap()
    }

    fn sequential_key() -> [u8; 32] {
        std::array::from_fn(|i| i as u8)
    }

    #[test]
    fn rfc8439_block_function_vector() {
        // RFC 8439 2.3.2
        let nonce: [u8; 12] = hex_bytes("000000090000004a00000000").try_into().unwrap();
        let expected = hex_bytes(
            "10f1e7e4d13b5915500fdd1fa32071c4 c7d1f4c733c068030422aa9ac3d46c4e
             d2826446079faa0914c2d705d98b02a2 b5129cd1de164eb9cbd083e8a2503c4e",
        );
        assert_eq!(block(&sequential_key(), &nonce, 1).to_vec(), expected);
        let mut stream = ChaCha20Stream::with_nonce(sequential_key(), nonce, 1);
        assert_eq!(stream.take_bytes(64), expected);
    }

    #[test]
    fn rfc8439_encryption_keystream() {
        // RFC 8439 2.4.2: first keystream bytes XOR the plaintext "Ladies and Gentlemen..."
        let nonce: [u8; 12] = hex_bytes("000000000000004a00000000").try_into().unwrap();
        let plaintext = b"Ladies and Gentlemen of the class of '99: If I could offer you only one tip for the future, sunscreen would be it.";
        let expected_prefix =
            hex_bytes("6e2e359a2568f98041ba0728dd0d6981 e97e7aec1d4360c20a27afccfd9fae0b");
        let mut stream = ChaCha20Stream::with_nonce(sequential_key(), nonce, 1);
        let ks = stream.take_bytes(plaintext.len());
        let ct: Vec<u8> = plaintext.iter().zip(&ks).map(|(p, k)| p ^ k).collect();
        assert_eq!(&ct[..32], &expected_prefix[..]);
        assert_eq!(ct.len(), 114);
        assert_eq!(&ct[112..], &hex_bytes("874d")[..]);
    }

    #[test]
    fn rfc8439_zero_key_vector() {
        // RFC 8439 A.1 test vector #1: zero key, zero nonce, counter 0
        let expected = hex_bytes(
            "76b8e0ada0f13d90405d6ae55386bd28 bdd219b8a08ded1aa836efcc8b770dc7
             da41597c5157488d7724e03fb8d84a37 6a43b8f41518a11cc387b669b2ee6586",
        );
        assert_eq!(block(&[0; 32], &[0; 12], 0).to_vec(), expected);
    }

    #[test]
    fn deterministic_and_chunking_independent() {
        let key = sequential_key();
        assert_eq!(chacha20_stream(&key, 300), chacha20_stream(&key, 300));
        assert!(chacha20_stream(&key, 0).is_empty());
        let whole = chacha20_stream(&key, 200);
        let mut s = ChaCha20Stream::new(key);
        let mut parts = s.take_bytes(7);
        parts.extend(s.take_bytes(100));
        parts.extend(s.take_bytes(93));
        assert_eq!(parts, whole);
        // production stream starts at counter 1 with zero nonce
        assert_eq!(&whole[..64], &block(&key, &[0; 12], 1)[..]);
    }
}
