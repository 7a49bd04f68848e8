#include "sepeval/audio.hpp"

#include "sepeval/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace sepeval {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xFF));
    out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<unsigned char>((v >> shift) & 0xFF));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

int bytes_per_sample(SampleFormat f) {
    switch (f) {
        case SampleFormat::pcm16: return 2;
        case SampleFormat::pcm24: return 3;
        case SampleFormat::float32: return 4;
    }
    return 0;
}

struct ParsedHeader {
    WavInfo info;
    std::uint64_t data_offset = 0;
};

// Walks the RIFF chunk list. Only the chunk headers and the fmt chunk are read.
ParsedHeader parse_header(std::ifstream& in, const std::filesystem::path& path) {
    const std::string name = path.string();
    in.seekg(0, std::ios::end);
    const auto file_size = static_cast<std::uint64_t>(in.tellg());
    in.seekg(0);

    std::array<unsigned char, 12> riff{};
    if (!in.read(reinterpret_cast<char*>(riff.data()), riff.size()))
        throw CodecError(name + ": not a RIFF/WAVE file (too short)");
    if (std::memcmp(riff.data(), "RIFF", 4) != 0 || std::memcmp(riff.data() + 8, "WAVE", 4) != 0)
        throw CodecError(name + ": not a RIFF/WAVE file");

    ParsedHeader header;
    bool have_fmt = false;
    std::uint64_t pos = 12;
    while (true) {
        std::array<unsigned char, 8> chunk{};
        in.seekg(static_cast<std::streamoff>(pos));
        if (!in.read(reinterpret_cast<char*>(chunk.data()), chunk.size())) {
            if (!have_fmt) throw CodecError(name + ": missing fmt chunk");
            throw TruncatedError(name + ": missing data chunk");
        }
        const std::uint32_t size = read_u32(chunk.data() + 4);
        const std::uint64_t body = pos + 8;

        if (std::memcmp(chunk.data(), "fmt ", 4) == 0) {
            if (size < 16) throw CodecError(name + ": fmt chunk too small");
            std::vector<unsigned char> fmt(size);
            if (!in.read(reinterpret_cast<char*>(fmt.data()), size))
                throw TruncatedError(name + ": truncated fmt chunk");
            std::uint16_t tag = read_u16(fmt.data());
            const int channels = read_u16(fmt.data() + 2);
            const auto rate = read_u32(fmt.data() + 4);
            const int bits = read_u16(fmt.data() + 14);
            if (tag == kFormatExtensible) {
                if (size < 40) throw CodecError(name + ": extensible fmt chunk too small");
                tag = read_u16(fmt.data() + 24);  // first two bytes of the subformat GUID
            }
            if (channels < 1 || rate == 0) throw CodecError(name + ": invalid channel count or rate");
            if (tag == kFormatPcm && bits == 16)
                header.info.format = SampleFormat::pcm16;
            else if (tag == kFormatPcm && bits == 24)
                header.info.format = SampleFormat::pcm24;
            else if (tag == kFormatFloat && bits == 32)
                header.info.format = SampleFormat::float32;
            else
                throw CodecError(name + ": unsupported sample format (tag " + std::to_string(tag) + ", " +
                                 std::to_string(bits) + " bits)");
            header.info.channels = channels;
            header.info.sample_rate = static_cast<int>(rate);
            have_fmt = true;
        } else if (std::memcmp(chunk.data(), "data", 4) == 0) {
            if (!have_fmt) throw CodecError(name + ": data chunk precedes fmt chunk");
            if (body + size > file_size) throw TruncatedError(name + ": truncated data payload");
            const auto frame_bytes =
                static_cast<std::uint64_t>(bytes_per_sample(header.info.format)) * header.info.channels;
            if (size % frame_bytes != 0) throw TruncatedError(name + ": partial sample frame in data chunk");
            header.info.frames = size / frame_bytes;
            header.data_offset = body;
            return header;
        }
        pos = body + size + (size & 1u);
    }
}

}  // namespace

void require_same_shape(const AudioSignal& a, const AudioSignal& b, const char* what) {
    if (a.length() != b.length() || a.channels() != b.channels() || a.sample_rate != b.sample_rate)
        throw ShapeError(std::string(what) + ": signals differ in length, channel count or rate (" +
                         std::to_string(a.length()) + "x" + std::to_string(a.channels()) + "@" +
                         std::to_string(a.sample_rate) + " vs " + std::to_string(b.length()) + "x" +
                         std::to_string(b.channels()) + "@" + std::to_string(b.sample_rate) + ")");
}

WavInfo read_wav_info(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open file");
    return parse_header(in, path).info;
}

AudioSignal load_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open file");
    const ParsedHeader header = parse_header(in, path);
    const WavInfo& info = header.info;
    const int width = bytes_per_sample(info.format);

    std::vector<unsigned char> payload(info.frames * info.channels * width);
    in.seekg(static_cast<std::streamoff>(header.data_offset));
    if (!in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size())))
        throw TruncatedError(path.string() + ": truncated data payload");

    AudioSignal signal(static_cast<Eigen::Index>(info.frames), info.channels, info.sample_rate);
    const unsigned char* p = payload.data();
    for (Eigen::Index n = 0; n < signal.length(); ++n) {
        for (Eigen::Index c = 0; c < signal.channels(); ++c, p += width) {
            double v = 0.0;
            switch (info.format) {
                case SampleFormat::pcm16:
                    v = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
                    break;
                case SampleFormat::pcm24: {
                    std::int32_t raw = p[0] | (p[1] << 8) | (p[2] << 16);
                    if (raw & 0x800000) raw -= 0x1000000;
                    v = raw / 8388608.0;
                    break;
                }
                case SampleFormat::float32: {
                    const std::uint32_t bits = read_u32(p);
                    float f;
                    std::memcpy(&f, &bits, sizeof f);
                    v = f;
                    break;
                }
            }
            signal.samples(n, c) = v;
        }
    }
    return signal;
}

void save_wav(const std::filesystem::path& path, const AudioSignal& signal, SampleFormat format) {
    if (!signal.samples.allFinite()) throw ConfigError(path.string() + ": refusing to write non-finite samples");
    const int width = bytes_per_sample(format);
    const auto channels = static_cast<std::uint32_t>(signal.channels());
    const auto data_bytes = static_cast<std::uint32_t>(signal.length() * channels * width);

    std::vector<unsigned char> out;
    out.reserve(44 + data_bytes);
    put_tag(out, "RIFF");
    put_u32(out, 36 + data_bytes);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, 16);
    put_u16(out, format == SampleFormat::float32 ? kFormatFloat : kFormatPcm);
    put_u16(out, static_cast<std::uint16_t>(channels));
    put_u32(out, static_cast<std::uint32_t>(signal.sample_rate));
    put_u32(out, static_cast<std::uint32_t>(signal.sample_rate) * channels * width);
    put_u16(out, static_cast<std::uint16_t>(channels * width));
    put_u16(out, static_cast<std::uint16_t>(8 * width));
    put_tag(out, "data");
    put_u32(out, data_bytes);

    for (Eigen::Index n = 0; n < signal.length(); ++n) {
        for (Eigen::Index c = 0; c < signal.channels(); ++c) {
            const double v = signal.samples(n, c);
            switch (format) {
                case SampleFormat::pcm16: {
                    const double q = std::clamp(std::nearbyint(v * 32768.0), -32768.0, 32767.0);
                    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
                    break;
                }
                case SampleFormat::pcm24: {
                    const double q = std::clamp(std::nearbyint(v * 8388608.0), -8388608.0, 8388607.0);
                    const auto raw = static_cast<std::uint32_t>(static_cast<std::int32_t>(q));
                    out.push_back(static_cast<unsigned char>(raw & 0xFF));
                    out.push_back(static_cast<unsigned char>((raw >> 8) & 0xFF));
                    out.push_back(static_cast<unsigned char>((raw >> 16) & 0xFF));
                    break;
                }
                case SampleFormat::float32: {
                    const auto f = static_cast<float>(v);
                    std::uint32_t bits;
                    std::memcpy(&bits, &f, sizeof bits);
                    put_u32(out, bits);
                    break;
                }
            }
        }
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError(path.string() + ": cannot open for writing");
    file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError(path.string() + ": write failed");
}

}  // namespace sepeval
