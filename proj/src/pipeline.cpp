#include "sdsrl/pipeline.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

namespace sdsrl {

namespace {

constexpr char kModelMagic[8] = {'S', 'D', 'S', 'R', 'L', 'M', 'D', 'L'};
constexpr std::uint32_t kModelVersion = 1;
constexpr std::size_t kTraceTail = 5;

// Stage seeds derived from the master seed.
enum : std::uint64_t { kStreamLandmarksImg = 0, kStreamLandmarksTxt = 1, kStreamSolver = 2 };

template <typename F>
auto stage(const char* name, F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        throw Error(std::string(name) + ": " + e.what());
    }
}

Matrix sample_landmarks(const Matrix& features, Index count, std::uint64_t seed) {
    std::vector<Index> order(static_cast<std::size_t>(features.rows()));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    Matrix landmarks(count, features.cols());
    for (Index i = 0; i < count; ++i) landmarks.row(i) = features.row(order[static_cast<std::size_t>(i)]);
    return landmarks;
}

void append_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t read_u32_le(const std::string& data, std::size_t& offset) {
    if (offset + 4 > data.size()) throw FormatError("truncated model file");
    const auto* b = reinterpret_cast<const unsigned char*>(data.data() + offset);
    offset += 4;
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64_le(const std::string& data, std::size_t& offset) {
    if (offset + 8 > data.size()) throw FormatError("truncated model file");
    const auto* b = reinterpret_cast<const unsigned char*>(data.data() + offset);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    offset += 8;
    return v;
}

void append_string(std::string& out, const std::string& s) {
    append_u32_le(out, static_cast<std::uint32_t>(s.size()));
    out += s;
}

std::string read_string(const std::string& data, std::size_t& offset) {
    const std::uint32_t len = read_u32_le(data, offset);
    if (offset + len > data.size()) throw FormatError("truncated model file");
    std::string s = data.substr(offset, len);
    offset += len;
    return s;
}

std::string join_trace(const std::vector<double>& trace) {
    std::string out;
    const std::size_t start = trace.size() > kTraceTail ? trace.size() - kTraceTail : 0;
    for (std::size_t i = start; i < trace.size(); ++i) {
        if (!out.empty()) out.push_back(',');
        out += format_double(trace[i]);
    }
    return out;
}

std::vector<double> parse_trace(const std::string& s) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t comma = s.find(',', pos);
        const std::string field = s.substr(pos, (comma == std::string::npos ? s.size() : comma) - pos);
        char* end = nullptr;
        out.push_back(std::strtod(field.c_str(), &end));
        if (end == field.c_str() || *end != '\0') throw FormatError("bad loss trace entry '" + field + "'");
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

double parse_double_field(const std::string& v, const char* key) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw FormatError(std::string("bad numeric manifest value for '") + key + "'");
    return x;
}

std::uint64_t parse_u64_field(const std::string& v, const char* key) {
    char* end = nullptr;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw FormatError(std::string("bad integer manifest value for '") + key + "'");
    return x;
}

}  // namespace

void validate_model(const SdsrlModel& model) {
    if (model.q < 1) throw DataError("model has no shared-space dimensions");
    if (model.proj_img.rows() != model.map_img.out_dim())
        throw ShapeError("image projection rows do not match lifted dimension");
    if (model.proj_txt.rows() != model.map_txt.out_dim())
        throw ShapeError("text projection rows do not match lifted dimension");
    if (model.proj_img.cols() != model.q || model.proj_txt.cols() != model.q)
        throw ShapeError("projection columns do not match the shared-space dimension");
    if (model.map_img.out_dim() > model.map_img.landmarks.rows() ||
        model.map_txt.out_dim() > model.map_txt.landmarks.rows())
        throw ShapeError("lifting map retains more dimensions than landmarks");
    validate_kernel(model.map_img.kernel);
    validate_kernel(model.map_txt.kernel);
    if (!(model.mu > 0.0)) throw DataError("model regularizer must be positive");
    if (!model.proj_img.allFinite() || !model.proj_txt.allFinite() ||
        !model.map_img.scaling.allFinite() || !model.map_txt.scaling.allFinite() ||
        !model.map_img.landmarks.allFinite() || !model.map_txt.landmarks.allFinite())
        throw DataError("model contains non-finite values");
}

SdsrlModel train(const Corpus& corpus, const TrainConfig& cfg) {
    stage("validate", [&] { validate_corpus(corpus); return 0; });

    const Index n_img = corpus.image_features.rows();
    const Index n_txt = corpus.text_features.rows();
    if (cfg.landmarks_img < 1 || cfg.landmarks_img > n_img)
        throw ConfigError("validate: image landmark count must lie in [1, " +
                          std::to_string(n_img) + "], got " + std::to_string(cfg.landmarks_img));
    if (cfg.landmarks_txt < 1 || cfg.landmarks_txt > n_txt)
        throw ConfigError("validate: text landmark count must lie in [1, " +
                          std::to_string(n_txt) + "], got " + std::to_string(cfg.landmarks_txt));
    validate_solver_config(cfg.solver);
    if (!(cfg.mu > 0.0)) throw ConfigError("validate: mu must be positive");

    Matrix x, y;
    stage("normalize", [&] {
        x = cfg.normalize_inputs ? l2_normalize_rows(corpus.image_features) : corpus.image_features;
        y = cfg.normalize_inputs ? l2_normalize_rows(corpus.text_features) : corpus.text_features;
        return 0;
    });

    SdsrlModel model;
    Matrix phi, psi;
    stage("kernel-lift", [&] {
        const Matrix lm_img =
            sample_landmarks(x, cfg.landmarks_img, derive_seed(cfg.seed, kStreamLandmarksImg));
        const Matrix lm_txt =
            sample_landmarks(y, cfg.landmarks_txt, derive_seed(cfg.seed, kStreamLandmarksTxt));
        model.map_img = fit_nystroem(cfg.kernel_img, lm_img, cfg.landmarks_img, cfg.eig_floor);
        model.map_txt = fit_nystroem(cfg.kernel_txt, lm_txt, cfg.landmarks_txt, cfg.eig_floor);
        phi = transform(model.map_img, x);
        psi = transform(model.map_txt, y);
        return 0;
    });

    LinkMatrices links;
    stage("semantics", [&] {
        links = build_all_links(phi, psi, corpus.image_labels, corpus.text_labels, cfg.mu);
        return 0;
    });

    stage("solver", [&] {
        SolverConfig solver = cfg.solver;
        solver.seed = derive_seed(cfg.seed, kStreamSolver);
        SolveResult result = solve_joint(links, solver);
        model.proj_img = std::move(result.projections.proj_img);
        model.proj_txt = std::move(result.projections.proj_txt);
        model.loss_trace = std::move(result.loss_trace);
        return 0;
    });

    model.q = cfg.solver.q;
    model.normalize_inputs = cfg.normalize_inputs;
    model.mu = cfg.mu;
    model.seed = cfg.seed;
    model.requested_landmarks_img = cfg.landmarks_img;
    model.requested_landmarks_txt = cfg.landmarks_txt;
    validate_model(model);
    return model;
}

Matrix embed(const SdsrlModel& model, const Matrix& x, Modality modality) {
    const NystroemMap& map = modality == Modality::image ? model.map_img : model.map_txt;
    const Matrix& proj = modality == Modality::image ? model.proj_img : model.proj_txt;
    const Matrix input = model.normalize_inputs ? l2_normalize_rows(x) : x;
    const Matrix lifted = transform(map, input);
    Matrix out(lifted.rows(), proj.cols());
    // per-row projection keeps embedding bit-exactly row-local
    parallel_rows(lifted.rows(), [&](Index lo, Index hi) {
        for (Index i = lo; i < hi; ++i) out.row(i) = lifted.row(i) * proj;
    });
    return out;
}

void save_model(const SdsrlModel& model, const std::string& path) {
    validate_model(model);
    std::string bytes;
    bytes.append(kModelMagic, sizeof(kModelMagic));
    append_u32_le(bytes, kModelVersion);

    const std::vector<std::pair<std::string, std::string>> manifest = {
        {"kernel_img", "rbf"},
        {"sigma_img", format_double(model.map_img.kernel.sigma)},
        {"kernel_txt", "rbf"},
        {"sigma_txt", format_double(model.map_txt.kernel.sigma)},
        {"q", std::to_string(model.q)},
        {"mu", format_double(model.mu)},
        {"seed", std::to_string(model.seed)},
        {"normalize_inputs", model.normalize_inputs ? "1" : "0"},
        {"landmarks_img_requested", std::to_string(model.requested_landmarks_img)},
        {"landmarks_txt_requested", std::to_string(model.requested_landmarks_txt)},
        {"loss_trace_tail", join_trace(model.loss_trace)},
    };
    append_u32_le(bytes, static_cast<std::uint32_t>(manifest.size()));
    for (const auto& [key, value] : manifest) {
        append_string(bytes, key);
        append_string(bytes, value);
    }

    const std::vector<std::pair<std::string, const Matrix*>> sections = {
        {"landmarks_img", &model.map_img.landmarks}, {"scaling_img", &model.map_img.scaling},
        {"landmarks_txt", &model.map_txt.landmarks}, {"scaling_txt", &model.map_txt.scaling},
        {"A", &model.proj_img},                      {"B", &model.proj_txt},
    };
    for (const auto& [name, matrix] : sections) {
        append_string(bytes, name);
        append_matrix_block(bytes, *matrix);
    }

    append_u64_le(bytes, fnv1a64(bytes.data(), bytes.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path);
}

SdsrlModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = std::move(buf).str();

    if (bytes.size() < sizeof(kModelMagic) + 4 + 8) throw FormatError(path + ": truncated model file");
    if (std::memcmp(bytes.data(), kModelMagic, sizeof(kModelMagic)) != 0)
        throw FormatError(path + ": not a model file (bad magic)");

    std::size_t offset = sizeof(kModelMagic);
    const std::uint32_t version = read_u32_le(bytes, offset);
    if (version != kModelVersion)
        throw FormatError(path + ": unsupported model version " + std::to_string(version));

    std::size_t checksum_at = bytes.size() - 8;
    const std::uint64_t declared = [&] {
        std::size_t off = checksum_at;
        return read_u64_le(bytes, off);
    }();
    if (fnv1a64(bytes.data(), checksum_at) != declared)
        throw FormatError(path + ": checksum mismatch (corrupt model file)");

    std::map<std::string, std::string> manifest;
    const std::uint32_t entries = read_u32_le(bytes, offset);
    for (std::uint32_t i = 0; i < entries; ++i) {
        std::string key = read_string(bytes, offset);
        manifest[key] = read_string(bytes, offset);
    }
    auto field = [&](const char* key) -> const std::string& {
        auto it = manifest.find(key);
        if (it == manifest.end())
            throw FormatError(path + ": manifest missing key '" + std::string(key) + "'");
        return it->second;
    };
    if (field("kernel_img") != "rbf" || field("kernel_txt") != "rbf")
        throw FormatError(path + ": unknown kernel kind in manifest");

    SdsrlModel model;
    model.map_img.kernel = {KernelKind::rbf, parse_double_field(field("sigma_img"), "sigma_img")};
    model.map_txt.kernel = {KernelKind::rbf, parse_double_field(field("sigma_txt"), "sigma_txt")};
    model.q = static_cast<Index>(parse_u64_field(field("q"), "q"));
    model.mu = parse_double_field(field("mu"), "mu");
    model.seed = parse_u64_field(field("seed"), "seed");
    model.normalize_inputs = field("normalize_inputs") == "1";
    model.requested_landmarks_img =
        static_cast<Index>(parse_u64_field(field("landmarks_img_requested"), "landmarks_img_requested"));
    model.requested_landmarks_txt =
        static_cast<Index>(parse_u64_field(field("landmarks_txt_requested"), "landmarks_txt_requested"));
    model.loss_trace = parse_trace(field("loss_trace_tail"));

    const std::vector<std::pair<std::string, Matrix*>> sections = {
        {"landmarks_img", &model.map_img.landmarks}, {"scaling_img", &model.map_img.scaling},
        {"landmarks_txt", &model.map_txt.landmarks}, {"scaling_txt", &model.map_txt.scaling},
        {"A", &model.proj_img},                      {"B", &model.proj_txt},
    };
    for (const auto& [name, matrix] : sections) {
        const std::string got = read_string(bytes, offset);
        if (got != name)
            throw FormatError(path + ": expected section '" + name + "', found '" + got + "'");
        *matrix = read_matrix_block(bytes, offset);
    }
    if (offset != checksum_at) throw FormatError(path + ": trailing bytes before checksum");

    validate_model(model);
    return model;
}

}  // namespace sdsrl
