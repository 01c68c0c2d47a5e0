#include "kagpipe/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace kagpipe {

using nlohmann::json;

std::string Triplet::render_plain() const {
    return head + " " + relation + " " + tail;
}

std::string Triplet::render_context() const {
    return "Triplet: " + render_plain();
}

ChunkCorpus ChunkCorpus::ingest(std::istream& in, const Tokenizer& tok) {
    ChunkCorpus corpus;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object() || !rec.contains("id") ||
            !rec.contains("title") || !rec.contains("text") || !rec["id"].is_string() ||
            !rec["title"].is_string() || !rec["text"].is_string()) {
            throw IngestError("malformed chunk record at line " + std::to_string(line_no));
        }
        Chunk chunk;
        chunk.id = rec["id"].get<std::string>();
        chunk.title = rec["title"].get<std::string>();
        chunk.text = rec["text"].get<std::string>();
        if (chunk.text.empty()) {
            throw IngestError("empty chunk text at line " + std::to_string(line_no));
        }
        chunk.token_count = tok.count(chunk.text);
        corpus.add(std::move(chunk));
    }
    return corpus;
}

ChunkCorpus ChunkCorpus::ingest_file(const std::string& path, const Tokenizer& tok) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open chunks file: " + path);
    return ingest(in, tok);
}

void ChunkCorpus::add(Chunk chunk) {
    auto [it, inserted] = by_id_.emplace(chunk.id, chunks_.size());
    if (!inserted) {
        throw IngestError("duplicate chunk id: " + chunk.id);
    }
    chunks_.push_back(std::move(chunk));
}

const Chunk* ChunkCorpus::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

std::string ChunkCorpus::render_context(const Chunk& chunk) const {
    return "Title: \"" + chunk.title + "\" Text: " + chunk.text;
}

namespace {

std::string dedup_key(const Triplet& t) {
    std::string key = t.head;
    key.push_back('\x1f');
    key += t.relation;
    key.push_back('\x1f');
    key += t.tail;
    key.push_back('\x1f');
    key += t.source_chunk_id.value_or("\x1e");
    return key;
}

}  // namespace

uint32_t KnowledgeGraphIndex::intern_entity(const std::string& name) {
    std::string norm = normalize_entity(name);
    auto it = entity_ids_.find(norm);
    if (it != entity_ids_.end()) return it->second;
    auto id = static_cast<uint32_t>(entities_.size());
    entities_.push_back(trim(name));
    adjacency_.emplace_back();
    entity_ids_.emplace(std::move(norm), id);
    return id;
}

std::optional<uint32_t> KnowledgeGraphIndex::add_triplet(Triplet triplet) {
    if (triplet.head.empty() || triplet.relation.empty() || triplet.tail.empty()) {
        throw std::invalid_argument("triplet fields must be non-empty");
    }
    if (!dedup_.insert(dedup_key(triplet)).second) return std::nullopt;

    auto tid = static_cast<uint32_t>(triplets_.size());
    uint32_t head_id = intern_entity(triplet.head);
    uint32_t tail_id = intern_entity(triplet.tail);
    adjacency_[head_id].push_back(tid);
    if (tail_id != head_id) adjacency_[tail_id].push_back(tid);
    if (triplet.source_chunk_id) by_chunk_[*triplet.source_chunk_id].push_back(tid);
    triplets_.push_back(std::move(triplet));
    return tid;
}

std::optional<uint32_t> KnowledgeGraphIndex::find_entity(const std::string& name) const {
    auto it = entity_ids_.find(normalize_entity(name));
    if (it == entity_ids_.end()) return std::nullopt;
    return it->second;
}

const std::vector<uint32_t>& KnowledgeGraphIndex::incident_triplets(uint32_t entity_id) const {
    return adjacency_.at(entity_id);
}

std::vector<uint32_t> KnowledgeGraphIndex::triplets_from_chunk(const std::string& chunk_id) const {
    auto it = by_chunk_.find(chunk_id);
    if (it == by_chunk_.end()) return {};
    return it->second;
}

std::vector<uint32_t> KnowledgeGraphIndex::one_hop(
    const std::vector<std::string>& entity_names) const {
    std::vector<uint32_t> out;
    for (const auto& name : entity_names) {
        auto id = find_entity(name);
        if (!id) continue;
        const auto& incident = adjacency_[*id];
        out.insert(out.end(), incident.begin(), incident.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

GraphStats KnowledgeGraphIndex::stats() const {
    GraphStats s;
    s.entity_count = entities_.size();
    s.triplet_count = triplets_.size();
    if (triplets_.empty()) return s;

    std::unordered_set<std::string> heads;
    std::unordered_set<std::string> tails;
    for (const auto& t : triplets_) {
        heads.insert(normalize_entity(t.head));
        tails.insert(normalize_entity(t.tail));
    }
    auto n_triplets = static_cast<double>(triplets_.size());
    if (!heads.empty()) s.avg_out_degree_per_head = n_triplets / static_cast<double>(heads.size());
    if (!tails.empty()) s.avg_in_degree_per_tail = n_triplets / static_cast<double>(tails.size());
    if (!entities_.empty()) {
        // Handshake identity: each triplet contributes one head and one tail
        // incidence, so the degree mass is exactly 2 * |triplets|.
        s.avg_degree_per_entity = 2.0 * n_triplets / static_cast<double>(entities_.size());
    }
    return s;
}

KnowledgeGraphIndex KnowledgeGraphIndex::from_triplets(std::vector<Triplet> triplets) {
    KnowledgeGraphIndex kg;
    for (auto& t : triplets) kg.add_triplet(std::move(t));
    return kg;
}

namespace {

constexpr uint32_t kSnapshotMagic = 0x4b414749;  // "KAGI"
constexpr uint32_t kSnapshotVersion = 1;

uint64_t fnv1a(uint64_t h, const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t triplet_checksum(const std::vector<Triplet>& triplets) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& t : triplets) {
        h = fnv1a(h, t.head.data(), t.head.size());
        h = fnv1a(h, "\x1f", 1);
        h = fnv1a(h, t.relation.data(), t.relation.size());
        h = fnv1a(h, "\x1f", 1);
        h = fnv1a(h, t.tail.data(), t.tail.size());
        h = fnv1a(h, "\x1f", 1);
        if (t.source_chunk_id) h = fnv1a(h, t.source_chunk_id->data(), t.source_chunk_id->size());
        h = fnv1a(h, "\x1e", 1);
    }
    return h;
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
bool read_pod(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return static_cast<bool>(in);
}

void write_string(std::ostream& out, const std::string& s) {
    write_pod(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

bool read_string(std::istream& in, std::string& s) {
    uint32_t len = 0;
    if (!read_pod(in, len)) return false;
    s.assign(len, '\0');
    in.read(s.data(), len);
    return static_cast<bool>(in);
}

void write_id_list(std::ostream& out, const std::vector<uint32_t>& ids) {
    write_pod(out, static_cast<uint32_t>(ids.size()));
    for (uint32_t id : ids) write_pod(out, id);
}

bool read_id_list(std::istream& in, std::vector<uint32_t>& ids) {
    uint32_t n = 0;
    if (!read_pod(in, n)) return false;
    ids.resize(n);
    for (auto& id : ids) {
        if (!read_pod(in, id)) return false;
    }
    return true;
}

}  // namespace

void KnowledgeGraphIndex::save(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    write_triplets_file(dir + "/triplets.jsonl", triplets_);

    std::ofstream out(dir + "/index.bin", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write adjacency snapshot in " + dir);
    write_pod(out, kSnapshotMagic);
    write_pod(out, kSnapshotVersion);
    write_pod(out, triplet_checksum(triplets_));
    write_pod(out, static_cast<uint32_t>(entities_.size()));
    for (const auto& e : entities_) write_string(out, e);
    for (const auto& ids : adjacency_) write_id_list(out, ids);
    std::vector<std::string> chunk_keys;
    chunk_keys.reserve(by_chunk_.size());
    for (const auto& [k, _] : by_chunk_) chunk_keys.push_back(k);
    std::sort(chunk_keys.begin(), chunk_keys.end());
    write_pod(out, static_cast<uint32_t>(chunk_keys.size()));
    for (const auto& k : chunk_keys) {
        write_string(out, k);
        write_id_list(out, by_chunk_.at(k));
    }
}

KnowledgeGraphIndex KnowledgeGraphIndex::load(const std::string& dir, bool* rebuilt) {
    auto triplets = read_triplets_file(dir + "/triplets.jsonl");
    if (rebuilt) *rebuilt = false;

    auto rebuild = [&] {
        if (rebuilt) *rebuilt = true;
        return from_triplets(std::move(triplets));
    };

    std::ifstream in(dir + "/index.bin", std::ios::binary);
    if (!in) return rebuild();

    uint32_t magic = 0;
    uint32_t version = 0;
    uint64_t checksum = 0;
    if (!read_pod(in, magic) || magic != kSnapshotMagic) return rebuild();
    if (!read_pod(in, version) || version != kSnapshotVersion) return rebuild();
    if (!read_pod(in, checksum) || checksum != triplet_checksum(triplets)) return rebuild();

    KnowledgeGraphIndex kg;
    uint32_t n_entities = 0;
    if (!read_pod(in, n_entities)) return rebuild();
    kg.entities_.resize(n_entities);
    kg.adjacency_.resize(n_entities);
    for (auto& e : kg.entities_) {
        if (!read_string(in, e)) return rebuild();
    }
    for (auto& ids : kg.adjacency_) {
        if (!read_id_list(in, ids)) return rebuild();
    }
    uint32_t n_chunks = 0;
    if (!read_pod(in, n_chunks)) return rebuild();
    for (uint32_t i = 0; i < n_chunks; ++i) {
        std::string key;
        std::vector<uint32_t> ids;
        if (!read_string(in, key) || !read_id_list(in, ids)) return rebuild();
        kg.by_chunk_.emplace(std::move(key), std::move(ids));
    }

    kg.triplets_ = std::move(triplets);
    for (uint32_t i = 0; i < kg.entities_.size(); ++i) {
        kg.entity_ids_.emplace(normalize_entity(kg.entities_[i]), i);
    }
    for (const auto& t : kg.triplets_) kg.dedup_.insert(dedup_key(t));
    return kg;
}

std::vector<Triplet> read_triplets_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open triplets file: " + path);
    std::vector<Triplet> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object() || !rec.contains("head") ||
            !rec.contains("relation") || !rec.contains("tail")) {
            throw IngestError("malformed triplet record at line " + std::to_string(line_no));
        }
        Triplet t;
        t.head = rec["head"].get<std::string>();
        t.relation = rec["relation"].get<std::string>();
        t.tail = rec["tail"].get<std::string>();
        if (rec.contains("source_chunk_id") && !rec["source_chunk_id"].is_null()) {
            t.source_chunk_id = rec["source_chunk_id"].get<std::string>();
        }
        out.push_back(std::move(t));
    }
    return out;
}

void write_triplets_file(const std::string& path, const std::vector<Triplet>& triplets) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write triplets file: " + path);
    for (const auto& t : triplets) {
        json rec{{"head", t.head}, {"relation", t.relation}, {"tail", t.tail}};
        if (t.source_chunk_id) {
            rec["source_chunk_id"] = *t.source_chunk_id;
        } else {
            rec["source_chunk_id"] = nullptr;
        }
        out << rec.dump() << '\n';
    }
}

void write_chunks_file(const std::string& path, const ChunkCorpus& corpus) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write chunks file: " + path);
    for (const auto& c : corpus.chunks()) {
        json rec{{"id", c.id}, {"title", c.title}, {"text", c.text}, {"token_count", c.token_count}};
        out << rec.dump() << '\n';
    }
}

}  // namespace kagpipe
