use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // entropy coder
    #[error("alphabet of {symbols} symbols does not fit into {precision}-bit counts")]
    AlphabetTooLarge { symbols: usize, precision: u32 },
    #[error("invalid probability mass at symbol {index}: {value}")]
    InvalidPmf { index: usize, value: f64 },
    #[error("symbol {symbol} outside alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },
    #[error("encoder already finished")]
    AlreadyFinished,
    #[error("bitstream exhausted after {consumed} bytes")]
    Exhausted { consumed: usize },
    #[error("corrupt arithmetic-coded payload")]
    CorruptPayload,

    // mixture model / quantizer
    #[error("channel {channel} requires previous channels to be known")]
    ChannelUnavailable { channel: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value {0}")]
    NonFinite(f64),

    // weights
    #[error("missing tensor `{0}`")]
    MissingTensor(String),
    #[error("tensor `{name}` has shape {found:?}, expected {expected:?}")]
    TensorShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("unexpected tensor `{0}` for this model mode")]
    UnexpectedTensor(String),
    #[error("{kind} model expects {expected} predictor(s), weights provide {found}")]
    PredictorCount {
        kind: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("bad magic bytes in {0}")]
    BadMagic(&'static str),
    #[error("unsupported {what} version {found}")]
    Version { what: &'static str, found: u32 },
    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    // codec
    #[error(
        "image of {height}x{width} cannot be represented (padded size exceeds 16-bit dimensions)"
    )]
    ImageTooLarge { height: usize, width: usize },
    #[error("sub-stream for scale {scale} declares {found:?}, expected {expected:?}")]
    DimensionMismatch {
        scale: usize,
        expected: (u16, u16, u16),
        found: (u16, u16, u16),
    },
    #[error("container was written for model mode {found}, decoder uses {expected}")]
    ModeMismatch { expected: String, found: String },
    #[error("checksum mismatch: stored {stored:08x}, decoded {decoded:08x}")]
    ChecksumMismatch { stored: u32, decoded: u32 },
    #[error("scale {0} is not stored in the container")]
    MissingScale(usize),

    #[error("unsupported image format: {0}")]
    ImageFormat(String),
    #[error(transparent)]
    Png(#[from] png::DecodingError),
    #[error(transparent)]
    PngEncode(#[from] png::EncodingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
