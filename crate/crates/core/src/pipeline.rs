//! Toolchain comparison: runs a sequence through the selected processing
//! chains and reports rate, quality and stage timings per chain.
//!
//! Three chains are compared against the untouched original:
//! `default` codes the input as-is, `mctf_only` denoises then codes, and
//! `proposed` denoises, estimates grain parameters, codes the denoised
//! frames, and re-synthesizes grain after decoding.

use std::fmt;
use std::process::Command;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::analysis::{Analyzer, AnalyzerConfig};
use crate::denoise::{denoise_sequence, DenoiseConfig};
use crate::error::{Error, Result};
use crate::frame::{read_yuv_frame, write_yuv_frame, Frame, SequenceGeometry};
use crate::metrics::{ms_ssim, psnr, PlaneScores};
use crate::proxy::{proxy_decode, proxy_encode, ProxyCodecConfig};
use crate::synthesis::{apply_grain, GrainPatternDatabase, SynthesisConfig};

/// Processing chain selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolchainMode {
    Default,
    MctfOnly,
    Proposed,
}

impl ToolchainMode {
    pub fn label(&self) -> &'static str {
        match self {
            ToolchainMode::Default => "default",
            ToolchainMode::MctfOnly => "mctf_only",
            ToolchainMode::Proposed => "proposed",
        }
    }
}

impl fmt::Display for ToolchainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ToolchainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(ToolchainMode::Default),
            "mctf_only" => Ok(ToolchainMode::MctfOnly),
            "proposed" => Ok(ToolchainMode::Proposed),
            other => Err(Error::Config(format!(
                "unknown toolchain mode '{other}' (expected default, mctf_only or proposed)"
            ))),
        }
    }
}

/// Seconds spent in each stage; zero when a stage does not run in a mode.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct StageTimings {
    pub denoise: f64,
    pub analyze: f64,
    pub encode: f64,
    pub decode: f64,
    pub synthesize: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.denoise + self.analyze + self.encode + self.decode + self.synthesize
    }
}

/// One comparison record: what one chain produced on the sequence.
#[derive(Debug, Clone, Serialize)]
pub struct ToolchainReport {
    pub mode: ToolchainMode,
    pub bitrate_bits: u64,
    pub psnr: PlaneScores,
    pub ms_ssim: PlaneScores,
    pub timings: StageTimings,
}

/// Encode/decode backend: the built-in proxy codec or external commands.
///
/// External command templates receive `{input}`, `{output}` and `{bitrate}`
/// placeholders and run through `sh -c`; the encode command maps raw YUV to a
/// bitstream file, the decode command maps the bitstream back to raw YUV.
#[derive(Debug, Clone)]
pub enum CodecHook {
    Proxy(ProxyCodecConfig),
    External {
        encode_cmd: String,
        decode_cmd: String,
        bitrate: String,
    },
}

impl Default for CodecHook {
    fn default() -> Self {
        CodecHook::Proxy(ProxyCodecConfig::default())
    }
}

/// Full pipeline configuration.
#[derive(Debug, Clone, Default)]
pub struct PipelineConfig {
    pub denoise: DenoiseConfig,
    pub analyzer: AnalyzerConfig,
    pub synthesis: SynthesisConfig,
    pub codec: CodecHook,
}

fn fill_placeholders(template: &str, input: &str, output: &str, bitrate: &str) -> String {
    template
        .replace("{input}", input)
        .replace("{output}", output)
        .replace("{bitrate}", bitrate)
}

fn run_external(
    frames: &[Frame],
    encode_cmd: &str,
    decode_cmd: &str,
    bitrate: &str,
) -> Result<(Vec<Frame>, u64, f64, f64)> {
    let dir = std::env::temp_dir();
    let tag = format!(
        "grainkit-{}-{:x}",
        std::process::id(),
        Instant::now().elapsed().as_nanos()
    );
    let input_path = dir.join(format!("{tag}-in.yuv"));
    let stream_path = dir.join(format!("{tag}.bin"));
    let output_path = dir.join(format!("{tag}-out.yuv"));

    let result = (|| {
        let mut raw = Vec::new();
        for f in frames {
            write_yuv_frame(f, &mut raw)?;
        }
        std::fs::write(&input_path, &raw)?;

        let run = |template: &str, inp: &std::path::Path, out: &std::path::Path| -> Result<f64> {
            let cmd = fill_placeholders(
                template,
                &inp.to_string_lossy(),
                &out.to_string_lossy(),
                bitrate,
            );
            let start = Instant::now();
            let status = Command::new("sh").arg("-c").arg(&cmd).status()?;
            if !status.success() {
                return Err(Error::ExternalCodec(format!(
                    "command `{cmd}` exited with {status}"
                )));
            }
            Ok(start.elapsed().as_secs_f64())
        };

        let encode_secs = run(encode_cmd, &input_path, &stream_path)?;
        let bits = std::fs::metadata(&stream_path)?.len() * 8;
        let decode_secs = run(decode_cmd, &stream_path, &output_path)?;

        let geometry = SequenceGeometry {
            width: frames[0].width(),
            height: frames[0].height(),
            bit_depth: 8,
            frame_count: frames.len(),
            frame_rate: 25.0,
        };
        let mut file = std::fs::File::open(&output_path)?;
        let mut decoded = Vec::with_capacity(frames.len());
        for i in 0..frames.len() {
            decoded.push(read_yuv_frame(&mut file, &geometry, i)?);
        }
        Ok((decoded, bits, encode_secs, decode_secs))
    })();

    for p in [&input_path, &stream_path, &output_path] {
        let _ = std::fs::remove_file(p);
    }
    result
}

fn encode_decode(frames: &[Frame], codec: &CodecHook) -> Result<(Vec<Frame>, u64, f64, f64)> {
    match codec {
        CodecHook::Proxy(config) => {
            let encode_start = Instant::now();
            let streams = frames
                .iter()
                .map(|f| proxy_encode(f, config))
                .collect::<Result<Vec<_>>>()?;
            let encode_secs = encode_start.elapsed().as_secs_f64();
            let bits = streams.iter().map(|s| s.bit_estimate).sum();
            let decode_start = Instant::now();
            let decoded = streams
                .iter()
                .map(proxy_decode)
                .collect::<Result<Vec<_>>>()?;
            Ok((decoded, bits, encode_secs, decode_start.elapsed().as_secs_f64()))
        }
        CodecHook::External {
            encode_cmd,
            decode_cmd,
            bitrate,
        } => run_external(frames, encode_cmd, decode_cmd, bitrate),
    }
}

fn mean_scores(scores: &[PlaneScores]) -> PlaneScores {
    let n = scores.len() as f64;
    PlaneScores {
        y: scores.iter().map(|s| s.y).sum::<f64>() / n,
        u: scores.iter().map(|s| s.u).sum::<f64>() / n,
        v: scores.iter().map(|s| s.v).sum::<f64>() / n,
        yuv: scores.iter().map(|s| s.yuv).sum::<f64>() / n,
    }
}

fn sequence_metrics(original: &[Frame], output: &[Frame]) -> Result<(PlaneScores, PlaneScores)> {
    let mut psnr_scores = Vec::with_capacity(original.len());
    let mut ssim_scores = Vec::with_capacity(original.len());
    for (a, b) in original.iter().zip(output) {
        psnr_scores.push(psnr(a, b)?);
        ssim_scores.push(ms_ssim(a, b)?);
    }
    Ok((mean_scores(&psnr_scores), mean_scores(&ssim_scores)))
}

/// Runs the requested chains over a sequence and scores each against the
/// original frames. Metric values are deterministic; timings are not.
pub fn run_comparison(
    frames: &[Frame],
    modes: &[ToolchainMode],
    config: &PipelineConfig,
) -> Result<Vec<ToolchainReport>> {
    if frames.is_empty() {
        return Err(Error::Config("sequence is empty".into()));
    }
    for f in frames {
        frames[0].check_same_geometry(f)?;
    }

    // Denoise once, shared by the modes that need it.
    let needs_denoise = modes
        .iter()
        .any(|m| matches!(m, ToolchainMode::MctfOnly | ToolchainMode::Proposed));
    let (denoised, denoise_secs) = if needs_denoise {
        let start = Instant::now();
        let d = denoise_sequence(frames, &config.denoise)?;
        (Some(d), start.elapsed().as_secs_f64())
    } else {
        (None, 0.0)
    };

    let needs_analysis = modes.iter().any(|m| matches!(m, ToolchainMode::Proposed));
    let db = needs_analysis.then(|| GrainPatternDatabase::build(config.synthesis.master_seed));

    let mut reports = Vec::with_capacity(modes.len());
    for &mode in modes {
        let mut timings = StageTimings::default();
        match mode {
            ToolchainMode::Default => {
                let (decoded, bits, enc, dec) = encode_decode(frames, &config.codec)?;
                timings.encode = enc;
                timings.decode = dec;
                reports.push(build_report(mode, bits, frames, &decoded, timings)?);
            }
            ToolchainMode::MctfOnly => {
                let denoised = denoised.as_ref().expect("denoise ran");
                timings.denoise = denoise_secs;
                let (decoded, bits, enc, dec) = encode_decode(denoised, &config.codec)?;
                timings.encode = enc;
                timings.decode = dec;
                reports.push(build_report(mode, bits, frames, &decoded, timings)?);
            }
            ToolchainMode::Proposed => {
                let denoised = denoised.as_ref().expect("denoise ran");
                let db = db.as_ref().expect("database built");
                timings.denoise = denoise_secs;

                let analyze_start = Instant::now();
                let analyzer = Analyzer::with_config(db, config.analyzer);
                let params = frames
                    .iter()
                    .zip(denoised)
                    .map(|(orig, den)| analyzer.analyze_frame(orig, den))
                    .collect::<Result<Vec<_>>>()?;
                timings.analyze = analyze_start.elapsed().as_secs_f64();

                let (decoded, bits, enc, dec) = encode_decode(denoised, &config.codec)?;
                timings.encode = enc;
                timings.decode = dec;

                let synth_start = Instant::now();
                let output = decoded
                    .iter()
                    .zip(&params)
                    .enumerate()
                    .map(|(t, (frame, p))| apply_grain(frame, p, db, t as u32, &config.synthesis))
                    .collect::<Result<Vec<_>>>()?;
                timings.synthesize = synth_start.elapsed().as_secs_f64();
                reports.push(build_report(mode, bits, frames, &output, timings)?);
            }
        }
    }
    Ok(reports)
}

fn build_report(
    mode: ToolchainMode,
    bitrate_bits: u64,
    original: &[Frame],
    output: &[Frame],
    timings: StageTimings,
) -> Result<ToolchainReport> {
    let (psnr_scores, ssim_scores) = sequence_metrics(original, output)?;
    Ok(ToolchainReport {
        mode,
        bitrate_bits,
        psnr: psnr_scores,
        ms_ssim: ssim_scores,
        timings,
    })
}
