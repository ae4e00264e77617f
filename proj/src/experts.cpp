#include "pmcts/experts.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace pmcts {

Evaluation Evaluator::evaluate(const Position& p) const {
    if (outcome(p) != Outcome::Ongoing) throw TerminalPositionError("cannot evaluate a terminal position: " + to_fen(p));
    return evaluate_unchecked(p);
}

std::vector<Evaluation> Evaluator::evaluate_batch(std::span<const Position> ps) const {
    if (ps.empty()) throw EmptyBatchError("evaluate_batch called with an empty batch");
    std::vector<Evaluation> out;
    out.reserve(ps.size());
    for (const Position& p : ps) out.push_back(evaluate(p));
    return out;
}

// ---------------------------------------------------------------------------
// Weight files: fixed little-endian header followed by the float block.
//
//   char[8]  magic "PMCTSWT\0"
//   u32      version
//   u32      kind (0 handcrafted, 1 mlp)
//   u32      input size
//   u32      hidden width
//   u32      policy size
//   u32      reserved (0)
//   u64      parameter count
//   u64      FNV-1a checksum of the header fields above (after magic) and the float block
//   f32[n]   parameters

namespace {

static_assert(std::endian::native == std::endian::little, "weight files are written in host order");

constexpr char kMagic[8] = {'P', 'M', 'C', 'T', 'S', 'W', 'T', '\0'};

struct Header {
    std::uint32_t version = kWeightsVersion;
    std::uint32_t kind = 0;
    std::uint32_t input = 0;
    std::uint32_t hidden = 0;
    std::uint32_t policy = 0;
    std::uint32_t reserved = 0;
    std::uint64_t count = 0;
};
static_assert(sizeof(Header) == 32);

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t checksum(const Header& h, const std::vector<float>& params) {
    return fnv1a(params.data(), params.size() * sizeof(float), fnv1a(&h, sizeof(h)));
}

const char* kPhaseFiles[kNumPhases] = {"opening.weights", "middlegame.weights", "endgame.weights"};

}  // namespace

void save_weights(const std::filesystem::path& file, const WeightsBlob& blob) {
    Header h;
    h.kind = static_cast<std::uint32_t>(blob.kind);
    if (blob.kind == ModelKind::Mlp) {
        h.input = kInputSize;
        h.hidden = blob.hidden;
        h.policy = kPolicySize;
    }
    h.count = blob.params.size();
    const std::uint64_t sum = checksum(h, blob.params);
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw WeightsError(WeightsError::Kind::Io, "cannot write " + file.string());
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&h), sizeof(h));
    out.write(reinterpret_cast<const char*>(&sum), sizeof(sum));
    out.write(reinterpret_cast<const char*>(blob.params.data()), static_cast<std::streamsize>(blob.params.size() * sizeof(float)));
    if (!out) throw WeightsError(WeightsError::Kind::Io, "write failed for " + file.string());
}

WeightsBlob load_weights(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw WeightsError(WeightsError::Kind::Io, "cannot open " + file.string());
    char magic[8];
    Header h;
    std::uint64_t sum = 0;
    if (!in.read(magic, sizeof(magic))) throw WeightsError(WeightsError::Kind::Truncated, file.string() + ": truncated header");
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw WeightsError(WeightsError::Kind::BadMagic, file.string() + ": not a weights file");
    if (!in.read(reinterpret_cast<char*>(&h), sizeof(h)) || !in.read(reinterpret_cast<char*>(&sum), sizeof(sum)))
        throw WeightsError(WeightsError::Kind::Truncated, file.string() + ": truncated header");
    if (h.version != kWeightsVersion)
        throw WeightsError(WeightsError::Kind::VersionMismatch, file.string() + ": version " + std::to_string(h.version) +
                                                                   ", expected " + std::to_string(kWeightsVersion));
    if (h.count > (std::uint64_t(1) << 32)) throw WeightsError(WeightsError::Kind::BadArchitecture, file.string() + ": implausible size");
    WeightsBlob blob;
    blob.kind = static_cast<ModelKind>(h.kind);
    blob.hidden = h.hidden;
    blob.params.resize(h.count);
    if (!in.read(reinterpret_cast<char*>(blob.params.data()), static_cast<std::streamsize>(h.count * sizeof(float))))
        throw WeightsError(WeightsError::Kind::Truncated, file.string() + ": truncated parameter block");
    if (in.peek() != std::char_traits<char>::eof())
        throw WeightsError(WeightsError::Kind::ChecksumMismatch, file.string() + ": trailing bytes");
    if (checksum(h, blob.params) != sum)
        throw WeightsError(WeightsError::Kind::ChecksumMismatch, file.string() + ": checksum mismatch");
    if (blob.kind == ModelKind::Mlp && (h.input != kInputSize || h.policy != kPolicySize))
        throw WeightsError(WeightsError::Kind::BadArchitecture, file.string() + ": unsupported input/policy size");
    if (blob.kind != ModelKind::Mlp && blob.kind != ModelKind::Handcrafted)
        throw WeightsError(WeightsError::Kind::BadArchitecture, file.string() + ": unknown model kind");
    return blob;
}

EvaluatorPtr evaluator_from_blob(const WeightsBlob& blob) {
    if (blob.kind == ModelKind::Handcrafted) return std::make_shared<HandcraftedEvaluator>(HandcraftedEvaluator::from_blob(blob));
    return std::make_shared<MlpEvaluator>(MlpEvaluator::from_blob(blob));
}

void save_model(const std::filesystem::path& file, const Evaluator& e) { save_weights(file, e.to_blob()); }

EvaluatorPtr load_model(const std::filesystem::path& file) { return evaluator_from_blob(load_weights(file)); }

void save_bundle(const std::filesystem::path& dir, const ExpertBundle& bundle) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["format"] = "pmcts-bundle";
    j["version"] = kWeightsVersion;
    for (int i = 0; i < kNumPhases; ++i) {
        save_model(dir / kPhaseFiles[i], *bundle.experts[i]);
        j["experts"][to_string(static_cast<GamePhase>(i))] = kPhaseFiles[i];
    }
    j["metadata"] = bundle.metadata;
    std::ofstream out(dir / "bundle.json");
    if (!out) throw WeightsError(WeightsError::Kind::Io, "cannot write " + (dir / "bundle.json").string());
    out << j.dump(2) << '\n';
}

ExpertBundle load_bundle(const std::filesystem::path& dir) {
    std::ifstream in(dir / "bundle.json");
    if (!in) throw WeightsError(WeightsError::Kind::Io, "cannot open " + (dir / "bundle.json").string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw WeightsError(WeightsError::Kind::Io, "malformed bundle.json: " + std::string(e.what()));
    }
    if (j.value("version", 0u) != kWeightsVersion)
        throw WeightsError(WeightsError::Kind::VersionMismatch, "bundle.json version mismatch");
    ExpertBundle bundle;
    for (int i = 0; i < kNumPhases; ++i) {
        const char* phase = to_string(static_cast<GamePhase>(i));
        const std::string name = j.contains("experts") ? j["experts"].value(phase, std::string(kPhaseFiles[i])) : kPhaseFiles[i];
        const auto path = dir / name;
        if (!std::filesystem::exists(path))
            throw WeightsError(WeightsError::Kind::MissingExpert, std::string("missing ") + phase + " expert: " + path.string());
        bundle.experts[i] = load_model(path);
    }
    bundle.metadata = j.value("metadata", nlohmann::json::object());
    return bundle;
}

ModelDirectory load_model_directory(const std::filesystem::path& dir) {
    ModelDirectory md;
    if (std::filesystem::exists(dir / "bundle.json")) {
        md.is_bundle = true;
        md.bundle = load_bundle(dir);
    } else if (std::filesystem::exists(dir / "model.weights")) {
        md.bundle = ExpertBundle::uniform(load_model(dir / "model.weights"));
    } else {
        throw WeightsError(WeightsError::Kind::MissingExpert, "no bundle.json or model.weights in " + dir.string());
    }
    return md;
}

}  // namespace pmcts
