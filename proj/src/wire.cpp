#include "promptgate/wire.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <string>

#include "promptgate/error.hpp"

namespace promptgate {

namespace {

constexpr std::array<char, 4> kMagic = {'P', 'G', 'W', '1'};

constexpr std::array<FieldTag, 3> kBroadcastFields = {FieldTag::Round, FieldTag::GlobalTokens, FieldTag::Probe};
constexpr std::array<FieldTag, 6> kUpdateFields = {FieldTag::ClientId,      FieldTag::Round,
                                                   FieldTag::GlobalTokens,  FieldTag::Probe,
                                                   FieldTag::PromptSamples, FieldTag::ProbeSamples};

class Writer {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void i64(std::int64_t v) { put(static_cast<std::uint64_t>(v), 8); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    void raw(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
    Bytes take() { return std::move(bytes_); }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    Bytes bytes_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    std::int64_t i64() { return static_cast<std::int64_t>(get(8)); }
    double f64() { return std::bit_cast<double>(get(8)); }
    std::span<const std::uint8_t> raw(std::uint64_t n) {
        need(n);
        auto out = bytes_.subspan(pos_, static_cast<std::size_t>(n));
        pos_ += static_cast<std::size_t>(n);
        return out;
    }
    bool done() const { return pos_ == bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::uint64_t n) const {
        if (n > bytes_.size() - pos_) throw Error(ErrorCode::WireFormat, "truncated frame");
    }
    std::uint64_t get(int n) {
        need(static_cast<std::uint64_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

bool is_allowed(MessageKind kind, FieldTag tag) {
    const auto allowed = allowed_fields(kind);
    return std::find(allowed.begin(), allowed.end(), tag) != allowed.end();
}

std::string tag_name(FieldTag tag) {
    switch (tag) {
        case FieldTag::Round: return "Round";
        case FieldTag::ClientId: return "ClientId";
        case FieldTag::GlobalTokens: return "GlobalTokens";
        case FieldTag::Probe: return "Probe";
        case FieldTag::PromptSamples: return "PromptSamples";
        case FieldTag::ProbeSamples: return "ProbeSamples";
        case FieldTag::LocalTokens: return "LocalTokens";
        case FieldTag::RawEmbeddings: return "RawEmbeddings";
    }
    return "tag " + std::to_string(static_cast<int>(tag));
}

void check_fields(MessageKind kind, std::span<const FieldTag> tags) {
    for (FieldTag tag : tags) {
        if (!is_allowed(kind, tag)) {
            throw Error(ErrorCode::PrivacyViolation, tag_name(tag) + " may not be sent in this message");
        }
    }
    for (FieldTag want : allowed_fields(kind)) {
        const auto n = std::count(tags.begin(), tags.end(), want);
        if (n != 1) throw Error(ErrorCode::WireFormat, tag_name(want) + " must appear exactly once");
    }
}

const WireField& field(const std::vector<WireField>& fields, FieldTag tag) {
    for (const auto& f : fields) {
        if (f.tag == tag) return f;
    }
    throw Error(ErrorCode::WireFormat, "missing " + tag_name(tag));
}

std::int64_t decode_i64(const WireField& f) {
    Reader r(f.payload);
    const auto v = r.i64();
    if (!r.done()) throw Error(ErrorCode::WireFormat, "oversized integer field");
    return v;
}

std::vector<Matrix> decode_matrices(const WireField& f) {
    Reader r(f.payload);
    const auto count = r.u32();
    std::vector<Matrix> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto rows = r.u32();
        const auto cols = r.u32();
        if (static_cast<std::uint64_t>(rows) * cols * 8 > r.remaining()) {
            throw Error(ErrorCode::WireFormat, "matrix larger than payload");
        }
        Matrix m(rows, cols);
        for (double& v : m.values()) v = r.f64();
        out.push_back(std::move(m));
    }
    if (!r.done()) throw Error(ErrorCode::WireFormat, "trailing bytes in token payload");
    return out;
}

LinearProbe decode_probe(const WireField& f) {
    Reader r(f.payload);
    const auto C = r.u32();
    const auto D = r.u32();
    if ((static_cast<std::uint64_t>(C) * D + C) * 8 + 1 > r.remaining()) {
        throw Error(ErrorCode::WireFormat, "probe larger than payload");
    }
    LinearProbe p = LinearProbe::zeros(static_cast<int>(C), static_cast<int>(D));
    p.trained = r.u8() != 0;
    for (double& v : p.weights.values()) v = r.f64();
    for (double& v : p.bias) v = r.f64();
    if (!r.done()) throw Error(ErrorCode::WireFormat, "trailing bytes in probe payload");
    return p;
}

}  // namespace

std::span<const FieldTag> allowed_fields(MessageKind kind) {
    switch (kind) {
        case MessageKind::Broadcast: return kBroadcastFields;
        case MessageKind::ClientUpdate: return kUpdateFields;
    }
    return {};
}

Bytes encode_frame(MessageKind kind, std::span<const WireField> fields) {
    std::vector<FieldTag> tags;
    for (const auto& f : fields) tags.push_back(f.tag);
    check_fields(kind, tags);
    Writer w;
    for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u16(kWireVersion);
    w.u8(static_cast<std::uint8_t>(kind));
    w.u32(static_cast<std::uint32_t>(fields.size()));
    for (const auto& f : fields) {
        w.u8(static_cast<std::uint8_t>(f.tag));
        w.u64(f.payload.size());
        w.raw(f.payload);
    }
    return w.take();
}

std::vector<WireField> decode_frame(std::span<const std::uint8_t> bytes, MessageKind expected) {
    Reader r(bytes);
    for (char c : kMagic) {
        if (r.u8() != static_cast<std::uint8_t>(c)) throw Error(ErrorCode::WireFormat, "bad magic");
    }
    const auto version = r.u16();
    if (version != kWireVersion) {
        throw Error(ErrorCode::WireFormat, "unsupported wire version " + std::to_string(version));
    }
    const auto kind = static_cast<MessageKind>(r.u8());
    if (kind != expected) throw Error(ErrorCode::WireFormat, "unexpected message kind");
    const auto count = r.u32();
    std::vector<WireField> fields;
    std::vector<FieldTag> tags;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto tag = static_cast<FieldTag>(r.u8());
        const auto len = r.u64();
        const auto payload = r.raw(len);
        fields.push_back({tag, Bytes(payload.begin(), payload.end())});
        tags.push_back(tag);
    }
    if (!r.done()) throw Error(ErrorCode::WireFormat, "trailing bytes after frame");
    check_fields(kind, tags);
    return fields;
}

Bytes encode_i64(std::int64_t v) {
    Writer w;
    w.i64(v);
    return w.take();
}

Bytes encode_matrices(std::span<const Matrix> matrices) {
    Writer w;
    w.u32(static_cast<std::uint32_t>(matrices.size()));
    for (const auto& m : matrices) {
        w.u32(static_cast<std::uint32_t>(m.rows()));
        w.u32(static_cast<std::uint32_t>(m.cols()));
        for (double v : m.values()) w.f64(v);
    }
    return w.take();
}

Bytes encode_probe(const LinearProbe& probe) {
    Writer w;
    w.u32(static_cast<std::uint32_t>(probe.weights.rows()));
    w.u32(static_cast<std::uint32_t>(probe.weights.cols()));
    w.u8(probe.trained ? 1 : 0);
    for (double v : probe.weights.values()) w.f64(v);
    for (double v : probe.bias) w.f64(v);
    return w.take();
}

Bytes encode(const BroadcastMsg& msg) {
    const std::vector<WireField> fields = {
        {FieldTag::Round, encode_i64(msg.round)},
        {FieldTag::GlobalTokens, encode_matrices(msg.global_tokens)},
        {FieldTag::Probe, encode_probe(msg.probe)},
    };
    return encode_frame(MessageKind::Broadcast, fields);
}

Bytes encode(const ClientUpdateMsg& msg) {
    const std::vector<WireField> fields = {
        {FieldTag::ClientId, encode_i64(msg.client_id)},
        {FieldTag::Round, encode_i64(msg.round)},
        {FieldTag::GlobalTokens, encode_matrices(msg.global_tokens)},
        {FieldTag::Probe, encode_probe(msg.probe)},
        {FieldTag::PromptSamples, encode_i64(msg.prompt_samples)},
        {FieldTag::ProbeSamples, encode_i64(msg.probe_samples)},
    };
    return encode_frame(MessageKind::ClientUpdate, fields);
}

BroadcastMsg decode_broadcast(std::span<const std::uint8_t> bytes) {
    const auto fields = decode_frame(bytes, MessageKind::Broadcast);
    BroadcastMsg msg;
    msg.round = decode_i64(field(fields, FieldTag::Round));
    msg.global_tokens = decode_matrices(field(fields, FieldTag::GlobalTokens));
    msg.probe = decode_probe(field(fields, FieldTag::Probe));
    return msg;
}

ClientUpdateMsg decode_client_update(std::span<const std::uint8_t> bytes) {
    const auto fields = decode_frame(bytes, MessageKind::ClientUpdate);
    ClientUpdateMsg msg;
    msg.client_id = decode_i64(field(fields, FieldTag::ClientId));
    msg.round = decode_i64(field(fields, FieldTag::Round));
    msg.global_tokens = decode_matrices(field(fields, FieldTag::GlobalTokens));
    msg.probe = decode_probe(field(fields, FieldTag::Probe));
    msg.prompt_samples = decode_i64(field(fields, FieldTag::PromptSamples));
    msg.probe_samples = decode_i64(field(fields, FieldTag::ProbeSamples));
    return msg;
}

}  // namespace promptgate
