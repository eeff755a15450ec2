#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "promptgate/linalg.hpp"
#include "promptgate/task_model.hpp"

namespace promptgate {

/// Server -> client at the start of a round.
struct BroadcastMsg {
    std::int64_t round = 0;
    std::vector<Matrix> global_tokens;  // phi^g, one matrix per slot
    LinearProbe probe;

    friend bool operator==(const BroadcastMsg&, const BroadcastMsg&) = default;
};

/// Client -> server at the end of a round. There is deliberately no member for
/// local tokens or unlabeled embeddings, and the wire format refuses both.
struct ClientUpdateMsg {
    std::int64_t client_id = 0;
    std::int64_t round = 0;
    std::vector<Matrix> global_tokens;  // this client's trained copy of phi^g
    LinearProbe probe;
    std::int64_t prompt_samples = 0;  // n_k
    std::int64_t probe_samples = 0;   // m_k

    friend bool operator==(const ClientUpdateMsg&, const ClientUpdateMsg&) = default;
};

// Frame layout (all integers little-endian, doubles as IEEE-754 bit patterns):
//   "PGW1" | u16 version | u8 kind | u32 field_count | field*
//   field  = u8 tag | u64 payload_bytes | payload
// Payloads:
//   Round, ClientId, PromptSamples, ProbeSamples : i64
//   GlobalTokens : u32 slots, then per slot u32 rows, u32 cols, f64[rows*cols]
//   Probe        : u32 C, u32 D, u8 trained, f64[C*D] weights, f64[C] bias
// Unknown tags and tags outside the kind's allow-list are rejected.

inline constexpr std::uint16_t kWireVersion = 1;

enum class MessageKind : std::uint8_t { Broadcast = 1, ClientUpdate = 2 };

enum class FieldTag : std::uint8_t {
    Round = 0x01,
    ClientId = 0x02,
    GlobalTokens = 0x03,
    Probe = 0x04,
    PromptSamples = 0x05,
    ProbeSamples = 0x06,
    // Reserved so that they can be named and refused; never allowed in any message.
    LocalTokens = 0x40,
    RawEmbeddings = 0x41,
};

struct WireField {
    FieldTag tag;
    std::vector<std::uint8_t> payload;
};

using Bytes = std::vector<std::uint8_t>;

/// Fields a message kind may carry; each must appear exactly once.
std::span<const FieldTag> allowed_fields(MessageKind kind);

/// Throws PrivacyViolation for a tag outside the allow-list, WireFormat for
/// duplicates or missing fields.
Bytes encode_frame(MessageKind kind, std::span<const WireField> fields);
std::vector<WireField> decode_frame(std::span<const std::uint8_t> bytes, MessageKind expected);

Bytes encode_i64(std::int64_t v);
Bytes encode_matrices(std::span<const Matrix> matrices);
Bytes encode_probe(const LinearProbe& probe);

Bytes encode(const BroadcastMsg& msg);
Bytes encode(const ClientUpdateMsg& msg);
BroadcastMsg decode_broadcast(std::span<const std::uint8_t> bytes);
ClientUpdateMsg decode_client_update(std::span<const std::uint8_t> bytes);

}  // namespace promptgate
