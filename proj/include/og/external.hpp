#pragma once

#include <map>
#include <string>
#include <vector>

#include "og/embed.hpp"

namespace og {

// Externally computed edge-feature embeddings, keyed by item id. Accepted
// formats: CSV rows "item_id,v1,...,vd" (an optional header row starting with
// "item_id" is skipped) or a JSON array of {"item_id": ..., "values": [...]}.
using ExternalEmbeddings = std::map<std::string, std::vector<double>>;

ExternalEmbeddings load_external_embeddings(const std::string& path, std::size_t expected_dim);

// Looks up one item and wraps it as an external-provenance descriptor. A row
// of all zeros is legal but collides with the absent-item encoding, so the
// caller gets a warning flag to surface.
EdgeDescriptor ingest_external_embedding(const ExternalEmbeddings& embeddings,
                                         const std::string& item_id, std::size_t expected_dim,
                                         bool* zero_vector_warning = nullptr);

}  // namespace og
