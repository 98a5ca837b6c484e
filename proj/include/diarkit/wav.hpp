#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace diarkit {

// Sample-indexed multi-channel signal. Rows are channels.
struct MultiChannelAudio {
    Eigen::MatrixXd samples;  // channels x time, values nominally in [-1, 1]
    int sample_rate = 16000;

    int channels() const { return static_cast<int>(samples.rows()); }
    Eigen::Index num_samples() const { return samples.cols(); }
    double duration() const {
        return static_cast<double>(samples.cols()) / static_cast<double>(sample_rate);
    }
};

inline int16_t pcm16_quantize(double x) {
    const double scaled = std::rint(x * 32768.0);
    if (scaled > 32767.0) return 32767;
    if (scaled < -32768.0) return -32768;
    return static_cast<int16_t>(scaled);
}

// Quantize a signal exactly the way the 16-bit writer does. The pipeline runs
// its enhanced audio through this so the in-memory path matches a
// write-then-read round trip bit for bit.
inline Eigen::MatrixXd pcm16_roundtrip(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.rows(); ++c) {
        for (Eigen::Index t = 0; t < x.cols(); ++t) {
            out(c, t) = static_cast<double>(pcm16_quantize(x(c, t))) / 32768.0;
        }
    }
    return out;
}

namespace detail {

inline void read_exact(std::istream& in, void* dst, size_t n, const std::string& what) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n) {
        throw std::runtime_error("wav: truncated file while reading " + what);
    }
}

inline uint32_t read_u32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    read_exact(in, b, 4, what);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline uint16_t read_u16(std::istream& in, const std::string& what) {
    unsigned char b[2];
    read_exact(in, b, 2, what);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

inline void write_u32(std::ostream& out, uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                       static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    out.write(b, 4);
}

inline void write_u16(std::ostream& out, uint16_t v) {
    const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF)};
    out.write(b, 2);
}

}  // namespace detail

// Reads 16-bit PCM or 32-bit IEEE float WAV, 1-8 channels.
inline MultiChannelAudio load_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("wav: cannot open " + path);

    char riff[4], wave[4];
    detail::read_exact(in, riff, 4, "RIFF header");
    detail::read_u32(in, "file size");
    detail::read_exact(in, wave, 4, "WAVE header");
    if (std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0) {
        throw std::runtime_error("wav: not a RIFF/WAVE file: " + path);
    }

    uint16_t format = 0, num_channels = 0, bits = 0;
    uint32_t sample_rate = 0;
    bool have_fmt = false;
    std::vector<char> data;

    while (true) {
        char id[4];
        in.read(id, 4);
        if (in.gcount() != 4) break;
        const uint32_t size = detail::read_u32(in, "chunk size");
        if (std::memcmp(id, "fmt ", 4) == 0) {
            format = detail::read_u16(in, "format");
            num_channels = detail::read_u16(in, "channels");
            sample_rate = detail::read_u32(in, "sample rate");
            detail::read_u32(in, "byte rate");
            detail::read_u16(in, "block align");
            bits = detail::read_u16(in, "bits per sample");
            if (size > 16) in.seekg(size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data.resize(size);
            detail::read_exact(in, data.data(), size, "data chunk");
        } else {
            in.seekg(size + (size & 1), std::ios::cur);
        }
    }
    if (!have_fmt) throw std::runtime_error("wav: missing fmt chunk: " + path);
    if (data.empty()) throw std::runtime_error("wav: missing data chunk: " + path);
    if (num_channels < 1 || num_channels > 8) {
        throw std::runtime_error("wav: unsupported channel count " +
                                 std::to_string(num_channels) + ": " + path);
    }
    if (!(format == 1 && bits == 16) && !(format == 3 && bits == 32)) {
        throw std::runtime_error("wav: only 16-bit PCM and 32-bit float supported: " + path);
    }

    const size_t bytes_per_sample = bits / 8;
    const size_t frame_bytes = bytes_per_sample * num_channels;
    const Eigen::Index frames = static_cast<Eigen::Index>(data.size() / frame_bytes);

    MultiChannelAudio audio;
    audio.sample_rate = static_cast<int>(sample_rate);
    audio.samples.resize(num_channels, frames);
    const char* p = data.data();
    for (Eigen::Index t = 0; t < frames; ++t) {
        for (int c = 0; c < num_channels; ++c) {
            if (format == 1) {
                int16_t v;
                std::memcpy(&v, p, 2);
                audio.samples(c, t) = static_cast<double>(v) / 32768.0;
                p += 2;
            } else {
                float v;
                std::memcpy(&v, p, 4);
                audio.samples(c, t) = static_cast<double>(v);
                p += 4;
            }
        }
    }
    return audio;
}

// Writes 16-bit PCM WAV.
inline void save_wav(const MultiChannelAudio& audio, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("wav: cannot write " + path);
    const int channels = audio.channels();
    const Eigen::Index frames = audio.num_samples();
    const uint32_t data_bytes = static_cast<uint32_t>(frames) * channels * 2;

    out.write("RIFF", 4);
    detail::write_u32(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    detail::write_u32(out, 16);
    detail::write_u16(out, 1);  // PCM
    detail::write_u16(out, static_cast<uint16_t>(channels));
    detail::write_u32(out, static_cast<uint32_t>(audio.sample_rate));
    detail::write_u32(out, static_cast<uint32_t>(audio.sample_rate) * channels * 2);
    detail::write_u16(out, static_cast<uint16_t>(channels * 2));
    detail::write_u16(out, 16);
    out.write("data", 4);
    detail::write_u32(out, data_bytes);
    for (Eigen::Index t = 0; t < frames; ++t) {
        for (int c = 0; c < channels; ++c) {
            const int16_t v = pcm16_quantize(audio.samples(c, t));
            const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF)};
            out.write(b, 2);
        }
    }
    if (!out) throw std::runtime_error("wav: write failed: " + path);
}

}  // namespace diarkit
