#pragma once

// Checkpoint manifests: a JSON list of layers (each backed by one .npy file)
// plus the adjacency pairs along which a layer's outputs feed the next layer.
//
//   {"layers":[{"name":"fc1","file":"fc1.npy","kind":"dense","out_dim":4,"in_dim":3}],
//    "adjacency":[["fc1","fc2"]]}

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "io.hpp"
#include "matrix.hpp"
#include "npy.hpp"

namespace foldkit {

enum class LayerKind { dense, conv_flattened };

inline const char* to_string(LayerKind kind) {
    return kind == LayerKind::dense ? "dense" : "conv-flattened";
}

struct LayerEntry {
    std::string name;
    std::string file;
    LayerKind kind = LayerKind::dense;
    std::size_t out_dim = 0;
    std::size_t in_dim = 0;
};

struct CheckpointManifest {
    std::vector<LayerEntry> layers;
    std::vector<std::pair<std::string, std::string>> adjacency;

    std::optional<std::size_t> index_of(const std::string& name) const {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (layers[i].name == name) return i;
        }
        return std::nullopt;
    }

    // Indices of layers fed by layer `i`.
    std::vector<std::size_t> successors(std::size_t i) const {
        std::vector<std::size_t> out;
        for (const auto& [from, to] : adjacency) {
            if (from == layers[i].name) out.push_back(*index_of(to));
        }
        return out;
    }
};

struct Checkpoint {
    CheckpointManifest manifest;
    std::vector<WeightMatrix> weights;  // parallel to manifest.layers
};

// Structural checks that need no file access: unique names, adjacency
// endpoints exist, dimension contract, chains only (at most one producer per
// layer) and producers listed before consumers.
inline void validate_manifest(const CheckpointManifest& m) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const auto& l = m.layers[i];
        if (l.name.empty()) throw Error(ErrorKind::format, "layer with empty name");
        if (l.out_dim == 0 || l.in_dim == 0) {
            throw Error(ErrorKind::manifest_inconsistency, "layer '" + l.name + "' has a zero dimension");
        }
        if (!index.emplace(l.name, i).second) {
            throw Error(ErrorKind::manifest_inconsistency, "duplicate layer name '" + l.name + "'");
        }
    }
    std::unordered_map<std::string, std::string> producer;
    for (const auto& [from, to] : m.adjacency) {
        const auto a = index.find(from);
        const auto b = index.find(to);
        if (a == index.end() || b == index.end()) {
            throw Error(ErrorKind::topology, "adjacency (" + from + ", " + to + ") names an unknown layer");
        }
        if (a->second >= b->second) {
            throw Error(ErrorKind::topology,
                        "adjacency (" + from + ", " + to + ") must point forward in layer order");
        }
        const auto& src = m.layers[a->second];
        const auto& dst = m.layers[b->second];
        if (dst.in_dim != src.out_dim) {
            throw Error(ErrorKind::topology, "adjacency (" + from + ", " + to + "): in_dim " +
                                                 std::to_string(dst.in_dim) + " != out_dim " +
                                                 std::to_string(src.out_dim));
        }
        if (!producer.emplace(to, from).second) {
            throw Error(ErrorKind::topology, "layer '" + to + "' has more than one producer");
        }
    }
}

namespace manifest_detail {

inline std::size_t read_dim(const nlohmann::json& layer, const char* key) {
    const auto& v = layer.at(key);
    if (!v.is_number_unsigned()) {
        throw Error(ErrorKind::format, std::string(key) + " must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

}  // namespace manifest_detail

inline CheckpointManifest parse_manifest(const std::string& text) {
    using nlohmann::json;
    using manifest_detail::read_dim;
    CheckpointManifest m;
    try {
        const json doc = json::parse(text);
        for (const auto& l : doc.at("layers")) {
            LayerEntry e;
            e.name = l.at("name").get<std::string>();
            e.file = l.at("file").get<std::string>();
            const auto kind = l.at("kind").get<std::string>();
            if (kind == "dense") {
                e.kind = LayerKind::dense;
            } else if (kind == "conv-flattened") {
                e.kind = LayerKind::conv_flattened;
            } else {
                throw Error(ErrorKind::format, "unknown layer kind '" + kind + "'");
            }
            e.out_dim = read_dim(l, "out_dim");
            e.in_dim = read_dim(l, "in_dim");
            m.layers.push_back(std::move(e));
        }
        if (doc.contains("adjacency")) {
            for (const auto& pair : doc.at("adjacency")) {
                if (!pair.is_array() || pair.size() != 2) {
                    throw Error(ErrorKind::format, "adjacency entries must be [from, to] pairs");
                }
                m.adjacency.emplace_back(pair[0].get<std::string>(), pair[1].get<std::string>());
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::format, std::string("manifest: ") + e.what());
    }
    validate_manifest(m);
    return m;
}

inline std::string manifest_to_json(const CheckpointManifest& m) {
    using nlohmann::ordered_json;
    ordered_json doc;
    doc["layers"] = ordered_json::array();
    for (const auto& l : m.layers) {
        doc["layers"].push_back({{"name", l.name},
                                 {"file", l.file},
                                 {"kind", to_string(l.kind)},
                                 {"out_dim", l.out_dim},
                                 {"in_dim", l.in_dim}});
    }
    doc["adjacency"] = ordered_json::array();
    for (const auto& [from, to] : m.adjacency) doc["adjacency"].push_back({from, to});
    return doc.dump(2) + "\n";
}

inline Checkpoint load_checkpoint(const fs::path& manifest_path) {
    Checkpoint ckpt;
    ckpt.manifest = parse_manifest(read_file(manifest_path));
    const fs::path base = manifest_path.parent_path();
    for (const auto& l : ckpt.manifest.layers) {
        const fs::path file = base / l.file;
        std::error_code ec;
        if (!fs::is_regular_file(file, ec)) {
            throw Error(ErrorKind::not_found, "layer '" + l.name + "': " + file.string());
        }
        WeightMatrix w = read_array(file);
        if (w.rows() != l.out_dim || w.cols() != l.in_dim) {
            throw Error(ErrorKind::manifest_inconsistency,
                        "layer '" + l.name + "' declared " + std::to_string(l.out_dim) + "x" +
                            std::to_string(l.in_dim) + " but file is " + w.shape_string());
        }
        ckpt.weights.push_back(std::move(w));
    }
    return ckpt;
}

// Writes every array and the manifest under `out_dir`; returns the manifest path.
inline fs::path save_checkpoint(const Checkpoint& ckpt, const fs::path& out_dir) {
    validate_manifest(ckpt.manifest);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorKind::write_failure, "cannot create " + out_dir.string());
    for (std::size_t i = 0; i < ckpt.manifest.layers.size(); ++i) {
        const auto& l = ckpt.manifest.layers[i];
        const auto& w = ckpt.weights.at(i);
        if (w.rows() != l.out_dim || w.cols() != l.in_dim) {
            throw Error(ErrorKind::manifest_inconsistency, "layer '" + l.name + "' shape drifted");
        }
        const fs::path file = out_dir / l.file;
        fs::create_directories(file.parent_path(), ec);
        write_array(w, file);
    }
    const fs::path manifest_path = out_dir / "manifest.json";
    atomic_write_file(manifest_path, manifest_to_json(ckpt.manifest));
    return manifest_path;
}

}  // namespace foldkit
