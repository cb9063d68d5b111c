use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Corpus, Episode, GazeProfileParams, SynthError};
use crate::world::BoardLayout;

pub const CORPUS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusHeader {
    pub version: u32,
    pub seed: u64,
    pub params: GazeProfileParams,
    pub n_episodes: usize,
    pub layout: BoardLayout,
}

/// JSONL: a header line followed by one episode per line.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut w: W) -> Result<(), SynthError> {
    let header = CorpusHeader {
        version: CORPUS_FORMAT_VERSION,
        seed: corpus.seed,
        params: corpus.params.clone(),
        n_episodes: corpus.episodes.len(),
        layout: corpus.layout.clone(),
    };
    serde_json::to_writer(&mut w, &header).map_err(|e| SynthError::Format(e.to_string()))?;
    w.write_all(b"\n")?;
    for ep in &corpus.episodes {
        serde_json::to_writer(&mut w, ep).map_err(|e| SynthError::Format(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_corpus<R: BufRead>(r: R) -> Result<Corpus, SynthError> {
    let mut lines = r.lines();
    let first = lines.next().ok_or_else(|| SynthError::Format("empty corpus file".into()))??;
    let header: CorpusHeader = serde_json::from_str(&first).map_err(|e| SynthError::Format(format!("header: {e}")))?;
    if header.version != CORPUS_FORMAT_VERSION {
        return Err(SynthError::Format(format!("unsupported corpus version {}", header.version)));
    }
    let mut episodes = Vec::with_capacity(header.n_episodes);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ep: Episode = serde_json::from_str(&line).map_err(|e| SynthError::Format(format!("line {}: {e}", i + 2)))?;
        episodes.push(ep);
    }
    if episodes.len() != header.n_episodes {
        return Err(SynthError::Format(format!("header announces {} episodes, found {}", header.n_episodes, episodes.len())));
    }
    Ok(Corpus { seed: header.seed, params: header.params, layout: header.layout, episodes })
}
