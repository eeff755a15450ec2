#include "promptgate/embedding_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_set>

#include "promptgate/error.hpp"

namespace promptgate {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    for (auto& f : out) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    }
    return out;
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& msg) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + msg);
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no, std::string_view what) {
    T value{};
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (field.empty() || ec != std::errc() || ptr != last) {
        parse_fail(line_no, "bad " + std::string(what) + " '" + std::string(field) + "'");
    }
    return value;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return in;
}

void write_double(std::ostream& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

}  // namespace

FederatedDataset read_embedding_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "line 1: missing header");
    ++line_no;
    const auto header = split_fields(line);
    static constexpr std::string_view expected[] = {"sample_id", "client_id", "split", "label_kind", "label_index"};
    if (header.size() < 7) parse_fail(line_no, "header needs 5 id columns and at least 2 values");
    for (std::size_t i = 0; i < 5; ++i) {
        if (header[i] != expected[i]) {
            parse_fail(line_no, "expected column '" + std::string(expected[i]) + "'");
        }
    }
    const std::size_t dimension = header.size() - 5;
    for (std::size_t d = 0; d < dimension; ++d) {
        if (header[5 + d] != "v" + std::to_string(d)) parse_fail(line_no, "expected column v" + std::to_string(d));
    }

    FederatedDataset out;
    out.dimension = static_cast<int>(dimension);
    std::unordered_set<std::int64_t> seen;
    std::map<int, ClientDataset> clients;
    int max_class = -1;
    int max_mode = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_fields(line);
        if (fields.size() != 5 + dimension) {
            throw Error(ErrorCode::DimensionMismatch,
                        "line " + std::to_string(line_no) + ": expected " + std::to_string(dimension) +
                            " values, got " + std::to_string(fields.size() < 5 ? 0 : fields.size() - 5));
        }
        Sample s;
        s.sample_id = parse_number<std::int64_t>(fields[0], line_no, "sample_id");
        s.client_id = parse_number<int>(fields[1], line_no, "client_id");
        if (s.client_id < 0) parse_fail(line_no, "negative client_id");
        if (fields[2] == "seed") {
            s.split = Split::SeedLabeled;
        } else if (fields[2] == "unlabeled") {
            s.split = Split::Unlabeled;
        } else if (fields[2] == "test") {
            s.split = Split::Test;
        } else {
            parse_fail(line_no, "unknown split '" + std::string(fields[2]) + "'");
        }
        const int index = parse_number<int>(fields[4], line_no, "label_index");
        if (index < 0) parse_fail(line_no, "negative label_index");
        if (fields[3] == "id") {
            s.truth = GroundTruth::id(index);
            max_class = std::max(max_class, index);
        } else if (fields[3] == "ood") {
            s.truth = GroundTruth::ood(index);
            max_mode = std::max(max_mode, index);
        } else {
            parse_fail(line_no, "unknown label_kind '" + std::string(fields[3]) + "'");
        }
        if (s.split == Split::SeedLabeled && s.truth.is_ood()) {
            parse_fail(line_no, "seed samples must be ID");
        }
        std::vector<double> values(dimension);
        for (std::size_t d = 0; d < dimension; ++d) values[d] = parse_number<double>(fields[5 + d], line_no, "value");
        try {
            s.embedding = l2_normalize(values);
        } catch (const Error& e) {
            parse_fail(line_no, e.what());
        }
        if (!seen.insert(s.sample_id).second) {
            throw Error(ErrorCode::DuplicateSampleId,
                        "line " + std::to_string(line_no) + ": sample_id " + std::to_string(s.sample_id));
        }
        auto& client = clients[s.client_id];
        client.client_id = s.client_id;
        switch (s.split) {
            case Split::SeedLabeled: client.labeled.push_back(std::move(s)); break;
            case Split::Unlabeled: client.unlabeled.push_back(std::move(s)); break;
            case Split::Test: client.test.push_back(std::move(s)); break;
        }
    }
    if (clients.empty()) throw Error(ErrorCode::ParseError, "no sample rows");
    const int num_clients = clients.rbegin()->first + 1;
    out.clients.resize(static_cast<std::size_t>(num_clients));
    for (int k = 0; k < num_clients; ++k) out.clients[k].client_id = k;
    for (auto& [k, client] : clients) out.clients[k] = std::move(client);
    out.num_classes = max_class + 1;
    out.num_ood_modes = std::max(max_mode + 1, 1);
    return out;
}

FederatedDataset load_embedding_csv(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    return read_embedding_csv(in);
}

std::vector<Embedding> read_anchor_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "line 1: missing header");
    ++line_no;
    const auto header = split_fields(line);
    if (header.size() < 3 || header[0] != "class_index") parse_fail(line_no, "expected class_index,v0,...");
    const std::size_t dimension = header.size() - 1;
    std::map<int, Embedding> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_fields(line);
        if (fields.size() != 1 + dimension) {
            throw Error(ErrorCode::DimensionMismatch, "line " + std::to_string(line_no) + ": expected " +
                                                          std::to_string(dimension) + " values");
        }
        const int index = parse_number<int>(fields[0], line_no, "class_index");
        std::vector<double> values(dimension);
        for (std::size_t d = 0; d < dimension; ++d) values[d] = parse_number<double>(fields[1 + d], line_no, "value");
        if (rows.contains(index)) parse_fail(line_no, "duplicate class_index " + std::to_string(index));
        try {
            rows[index] = l2_normalize(values);
        } catch (const Error& e) {
            parse_fail(line_no, e.what());
        }
    }
    std::vector<Embedding> out;
    int expected = 0;
    for (auto& [index, v] : rows) {
        if (index != expected++) throw Error(ErrorCode::ParseError, "class_index values must be contiguous from 0");
        out.push_back(std::move(v));
    }
    if (out.size() < 3) throw Error(ErrorCode::ParseError, "need at least 2 ID anchors and the OOD anchor");
    return out;
}

std::vector<Embedding> load_anchor_csv(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    return read_anchor_csv(in);
}

FederatedDataset load_federated(const std::filesystem::path& samples, const std::filesystem::path& anchors) {
    auto data = load_embedding_csv(samples);
    data.anchors = load_anchor_csv(anchors);
    const int anchor_classes = static_cast<int>(data.anchors.size()) - 1;
    if (anchor_classes < data.num_classes) {
        throw Error(ErrorCode::InvalidShape, "anchor file covers fewer classes than the samples use");
    }
    data.num_classes = anchor_classes;
    data.validate();
    return data;
}

void write_embedding_csv(std::ostream& out, const FederatedDataset& data) {
    out << "sample_id,client_id,split,label_kind,label_index";
    for (int d = 0; d < data.dimension; ++d) out << ",v" << d;
    out << '\n';
    for (const auto& client : data.clients) {
        for (const auto* list : {&client.labeled, &client.unlabeled, &client.test}) {
            for (const auto& s : *list) {
                out << s.sample_id << ',' << s.client_id << ',' << to_string(s.split) << ','
                    << (s.truth.is_id() ? "id" : "ood") << ',' << s.truth.index;
                for (double v : s.embedding) {
                    out << ',';
                    write_double(out, v);
                }
                out << '\n';
            }
        }
    }
}

void write_anchor_csv(std::ostream& out, const std::vector<Embedding>& anchors) {
    out << "class_index";
    const std::size_t dimension = anchors.empty() ? 0 : anchors.front().size();
    for (std::size_t d = 0; d < dimension; ++d) out << ",v" << d;
    out << '\n';
    for (std::size_t c = 0; c < anchors.size(); ++c) {
        out << c;
        for (double v : anchors[c]) {
            out << ',';
            write_double(out, v);
        }
        out << '\n';
    }
}

}  // namespace promptgate
