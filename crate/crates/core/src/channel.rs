//! JPEG transmission path: the user compresses the ciphertext, the SNS
//! provider decompresses and recompresses it, the audience decompresses.
//!
//! The codec is an external baseline JPEG implementation (`jpeg-encoder` for
//! encoding, `zune-jpeg` for decoding). Quality factors use the IJG scaling
//! of the standard quantization tables.

use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use zune_core::bytestream::ZCursor;
use zune_core::colorspace::ColorSpace;
use zune_core::options::DecoderOptions;

use crate::error::{Error, Hop, Result};
use crate::raster::RasterImage;

/// A JPEG quality factor in `1..=100`, or a lossless pass-through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quality {
    Bypass,
    Jpeg(u8),
}

impl Quality {
    pub fn jpeg(q: u8) -> Result<Quality> {
        if (1..=100).contains(&q) {
            Ok(Quality::Jpeg(q))
        } else {
            Err(Error::Config(format!("JPEG quality {q} outside 1..=100")))
        }
    }

    pub fn is_bypass(self) -> bool {
        self == Quality::Bypass
    }
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quality::Bypass => f.write_str("bypass"),
            Quality::Jpeg(q) => write!(f, "{q}"),
        }
    }
}

impl FromStr for Quality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bypass" | "lossless" | "none" => Ok(Quality::Bypass),
            other => other
                .parse::<u8>()
                .map_err(|_| Error::Config(format!("bad quality {s:?}")))
                .and_then(Quality::jpeg),
        }
    }
}

impl Serialize for Quality {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Quality::Bypass => s.serialize_str("bypass"),
            Quality::Jpeg(q) => s.serialize_u8(*q),
        }
    }
}

impl<'de> Deserialize<'de> for Quality {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(n) => u8::try_from(n)
                .map_err(|_| de::Error::custom(format!("quality {n} outside 1..=100")))
                .and_then(|q| Quality::jpeg(q).map_err(de::Error::custom)),
            Raw::Text(t) => t.parse().map_err(de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Subsampling {
    #[default]
    S420,
    S444,
}

impl fmt::Display for Subsampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subsampling::S420 => "4:2:0",
            Subsampling::S444 => "4:4:4",
        })
    }
}

impl FromStr for Subsampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "4:2:0" | "420" => Ok(Subsampling::S420),
            "4:4:4" | "444" => Ok(Subsampling::S444),
            other => Err(Error::Config(format!("unknown chroma subsampling {other:?}"))),
        }
    }
}

impl Serialize for Subsampling {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Subsampling {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub user_quality: Quality,
    pub sns_quality: Quality,
    #[serde(default)]
    pub chroma_subsampling: Subsampling,
}

impl ChannelConfig {
    pub fn bypass() -> Self {
        ChannelConfig {
            user_quality: Quality::Bypass,
            sns_quality: Quality::Bypass,
            chroma_subsampling: Subsampling::default(),
        }
    }
}

/// Encodes an RGB raster as a baseline JFIF stream.
pub fn encode_jpeg(image: &RasterImage, quality: u8, subsampling: Subsampling) -> Result<Vec<u8>> {
    if image.channels() != 3 {
        return Err(Error::Channels(image.channels()));
    }
    let q = Quality::jpeg(quality)?;
    let Quality::Jpeg(quality) = q else { unreachable!() };
    let (w, h) = match (u16::try_from(image.width()), u16::try_from(image.height())) {
        (Ok(w), Ok(h)) => (w, h),
        _ => return Err(Error::Dimension("image too large for JPEG".into())),
    };
    let mut out = Vec::new();
    let mut encoder = jpeg_encoder::Encoder::new(&mut out, quality);
    encoder.set_sampling_factor(match subsampling {
        Subsampling::S420 => jpeg_encoder::SamplingFactor::R_4_2_0,
        Subsampling::S444 => jpeg_encoder::SamplingFactor::R_4_4_4,
    });
    encoder
        .encode(image.pixels(), w, h, jpeg_encoder::ColorType::Rgb)
        .map_err(|e| Error::parse("jpeg", e.to_string()))?;
    Ok(out)
}

/// Decodes a JFIF stream to RGB.
pub fn decode_jpeg(bytes: &[u8]) -> Result<RasterImage> {
    let options = DecoderOptions::default()
        .jpeg_set_out_colorspace(ColorSpace::RGB)
        .set_max_width(1 << 14)
        .set_max_height(1 << 14);
    let mut decoder = zune_jpeg::JpegDecoder::new_with_options(ZCursor::new(bytes), options);
    let pixels = decoder
        .decode()
        .map_err(|e| Error::parse("jpeg", format!("{e:?}")))?;
    let info = decoder
        .info()
        .ok_or_else(|| Error::parse("jpeg", "missing frame header"))?;
    if decoder.output_colorspace() != Some(ColorSpace::RGB) {
        return Err(Error::parse("jpeg", "stream does not decode to RGB"));
    }
    RasterImage::rgb(info.width as usize, info.height as usize, pixels)
        .map_err(|e| Error::parse("jpeg", e.to_string()))
}

/// One JPEG encode/decode round trip at quality `quality`.
pub fn single_hop(image: &RasterImage, quality: u8, subsampling: Subsampling) -> Result<RasterImage> {
    decode_jpeg(&encode_jpeg(image, quality, subsampling)?)
}

/// Result of [`transmit_with_intermediates`].
#[derive(Debug, Clone)]
pub struct Transmission {
    pub received: RasterImage,
    /// JFIF produced by the user hop, when it compressed.
    pub user_jpeg: Option<Vec<u8>>,
    /// JFIF produced by the SNS hop, when it compressed.
    pub sns_jpeg: Option<Vec<u8>>,
}

fn hop(image: RasterImage, quality: Quality, subsampling: Subsampling, which: Hop) -> Result<(RasterImage, Option<Vec<u8>>)> {
    match quality {
        Quality::Bypass => Ok((image, None)),
        Quality::Jpeg(q) => {
            let tag = |e: Error| Error::Channel {
                hop: which,
                reason: e.to_string(),
            };
            let bytes = encode_jpeg(&image, q, subsampling).map_err(tag)?;
            let decoded = decode_jpeg(&bytes).map_err(tag)?;
            Ok((decoded, Some(bytes)))
        }
    }
}

pub fn transmit_with_intermediates(encrypted: &RasterImage, config: &ChannelConfig) -> Result<Transmission> {
    let (after_user, user_jpeg) = hop(encrypted.clone(), config.user_quality, config.chroma_subsampling, Hop::User)?;
    let (received, sns_jpeg) = hop(after_user, config.sns_quality, config.chroma_subsampling, Hop::Sns)?;
    Ok(Transmission {
        received,
        user_jpeg,
        sns_jpeg,
    })
}

/// User compression, SNS recompression and the final decompression.
pub fn transmit(encrypted: &RasterImage, config: &ChannelConfig) -> Result<RasterImage> {
    transmit_with_intermediates(encrypted, config).map(|t| t.received)
}
