#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "promptgate/dataset.hpp"

namespace promptgate {

// Sample CSV:  sample_id,client_id,split,label_kind,label_index,v0,...,v{D-1}
//   split in {seed,unlabeled,test}; label_kind in {id,ood}; indices 0-based.
// Anchor CSV:  class_index,v0,...,v{D-1}   with class_index 0..C (C = OOD).

/// Parses the sample CSV. Embeddings are l2-normalized on import. The class
/// count is the largest ID label index + 1; anchors are left empty.
FederatedDataset load_embedding_csv(const std::filesystem::path& path);
FederatedDataset read_embedding_csv(std::istream& in);

/// Parses an anchor CSV; every class index 0..C must appear exactly once.
std::vector<Embedding> load_anchor_csv(const std::filesystem::path& path);
std::vector<Embedding> read_anchor_csv(std::istream& in);

/// Samples plus anchors. When the anchor file declares more ID classes than
/// the samples use, the anchor count wins.
FederatedDataset load_federated(const std::filesystem::path& samples, const std::filesystem::path& anchors);

void write_embedding_csv(std::ostream& out, const FederatedDataset& data);
void write_anchor_csv(std::ostream& out, const std::vector<Embedding>& anchors);

}  // namespace promptgate
