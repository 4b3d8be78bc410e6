use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;

use crate::codec::Reader;

use super::block::{canonical_serialize, deserialize_block, Block};
use super::verify::{verify_block, BlockRejected};
use super::LedgerError;

/// A verified, append-only sequence of blocks.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Chain {
    blocks: Vec<Block>,
}

impl Chain {
    pub fn new() -> Self {
        Chain::default()
    }

    pub fn height(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn tip(&self) -> Option<&Block> {
        self.blocks.last()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Block at 1-based `height`.
    pub fn get(&self, height: u64) -> Option<&Block> {
        height
            .checked_sub(1)
            .and_then(|i| self.blocks.get(i as usize))
    }

    /// Appends `block` if it verifies against the tip; otherwise the chain
    /// is left unchanged.
    pub fn verify_and_append(&mut self, block: Block) -> Result<(), BlockRejected> {
        verify_block(self.tip(), &block)?;
        self.blocks.push(block);
        Ok(())
    }

    /// Chain file bytes: `[u32 BE len][canonical block]` per block.
    pub fn to_bytes(&self) -> Result<Vec<u8>, LedgerError> {
        let mut out = Vec::new();
        for b in &self.blocks {
            let bytes = canonical_serialize(b)?;
            out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
            out.extend_from_slice(&bytes);
        }
        Ok(out)
    }

    /// Replays verification from genesis over chain file bytes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Chain, LedgerError> {
        let mut chain = Chain::new();
        let mut r = Reader::new(bytes);
        while r.remaining() > 0 {
            let height = chain.height() + 1;
            let at = |e: LedgerError| LedgerError::VerificationFailed {
                height,
                reason: e.to_string(),
            };
            let raw = r.bytes().map_err(|e| at(e.into()))?;
            let block = deserialize_block(raw).map_err(at)?;
            chain.verify_and_append(block).map_err(|e| at(e.into()))?;
        }
        Ok(chain)
    }

    pub fn save(&self, path: &Path) -> Result<(), LedgerError> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Chain, LedgerError> {
        Chain::from_bytes(&std::fs::read(path)?)
    }
}

/// Append-only writer for a chain file.
pub struct ChainFile {
    file: File,
}

impl ChainFile {
    pub fn open(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ChainFile { file })
    }

    pub fn append(&mut self, block: &Block) -> Result<(), LedgerError> {
        let bytes = canonical_serialize(block)?;
        let mut framed = Vec::with_capacity(4 + bytes.len());
        framed.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
        framed.extend_from_slice(&bytes);
        self.file.write_all(&framed)?;
        self.file.flush()?;
        Ok(())
    }
}
