//! The thirteen pre-trained models whose pooled embeddings feed the regressors.

/// One pre-trained model: grid abbreviation, file token, embedding width and input rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PtmInfo {
    pub abbrev: &'static str,
    pub id: &'static str,
    pub dim: usize,
    pub sample_rate: u32,
}

const fn ptm(abbrev: &'static str, id: &'static str, dim: usize, sample_rate: u32) -> PtmInfo {
    PtmInfo {
        abbrev,
        id,
        dim,
        sample_rate,
    }
}

pub const PTMS: [PtmInfo; 13] = [
    ptm("U", "unispeech-sat", 768, 16_000),
    ptm("W2", "wav2vec2", 768, 16_000),
    ptm("W", "wavlm", 768, 16_000),
    ptm("X", "xlsr", 1280, 16_000),
    ptm("Wh", "whisper", 512, 16_000),
    ptm("M", "mms", 1280, 16_000),
    ptm("XV", "xvector", 512, 16_000),
    ptm("EC", "ecapa", 192, 16_000),
    ptm("m2v", "music2vec-v1", 768, 16_000),
    ptm("MT95", "mert-v1-95m", 768, 24_000),
    ptm("MTP", "mert-v0-public", 768, 16_000),
    ptm("MT3M", "mert-v1-330m", 1024, 24_000),
    ptm("MTV0", "mert-v0", 768, 16_000),
];

/// Looks a model up by abbreviation (`XV`) or id (`xvector`).
pub fn lookup(name: &str) -> Option<&'static PtmInfo> {
    PTMS.iter().find(|p| p.abbrev == name || p.id == name)
}

/// Embedding file token for `name`; unknown names are taken to be ids already.
pub fn resolve_id(name: &str) -> &str {
    lookup(name).map_or(name, |p| p.id)
}
