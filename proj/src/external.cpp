#include "og/external.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "og/errors.hpp"

namespace og {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void check_dim(const std::string& item_id, std::size_t got, std::size_t expected) {
    if (got != expected) {
        throw DimensionError("embedding for item '" + item_id + "' has " + std::to_string(got) +
                             " values, model expects " + std::to_string(expected));
    }
}

ExternalEmbeddings parse_csv(std::istream& in, std::size_t expected_dim) {
    ExternalEmbeddings out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string field;
        if (!std::getline(row, field, ',')) continue;
        if (line_no == 1 && field == "item_id") continue;
        const std::string item_id = field;
        std::vector<double> values;
        while (std::getline(row, field, ',')) {
            try {
                values.push_back(std::stod(field));
            } catch (const std::exception&) {
                throw IoError("bad number '" + field + "' on embedding CSV line " +
                              std::to_string(line_no));
            }
        }
        check_dim(item_id, values.size(), expected_dim);
        out[item_id] = std::move(values);
    }
    return out;
}

ExternalEmbeddings parse_json(std::istream& in, std::size_t expected_dim) {
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad embedding JSON: ") + e.what());
    }
    if (!doc.is_array()) throw IoError("embedding JSON must be an array of objects");
    ExternalEmbeddings out;
    for (const auto& row : doc) {
        if (!row.contains("item_id") || !row.contains("values")) {
            throw IoError("embedding JSON rows need 'item_id' and 'values'");
        }
        const std::string item_id = row["item_id"].get<std::string>();
        std::vector<double> values = row["values"].get<std::vector<double>>();
        check_dim(item_id, values.size(), expected_dim);
        out[item_id] = std::move(values);
    }
    return out;
}

}  // namespace

ExternalEmbeddings load_external_embeddings(const std::string& path, std::size_t expected_dim) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embeddings file: " + path);
    if (ends_with(path, ".json")) return parse_json(in, expected_dim);
    return parse_csv(in, expected_dim);
}

EdgeDescriptor ingest_external_embedding(const ExternalEmbeddings& embeddings,
                                         const std::string& item_id, std::size_t expected_dim,
                                         bool* zero_vector_warning) {
    auto it = embeddings.find(item_id);
    if (it == embeddings.end()) throw IoError("no external embedding for item '" + item_id + "'");
    check_dim(item_id, it->second.size(), expected_dim);
    EdgeDescriptor out;
    out.values = it->second;
    out.provenance = EdgeDescriptor::Provenance::external;
    if (zero_vector_warning) *zero_vector_warning = out.all_zero();
    return out;
}

}  // namespace og
