#include "sdsrl/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace sdsrl {

namespace {

constexpr char kMatrixMagic[4] = {'S', 'D', 'S', 'M'};

void append_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::uint32_t read_u32_le(const std::string& data, std::size_t& offset) {
    if (offset + 4 > data.size()) throw FormatError("truncated matrix block");
    const auto* b = reinterpret_cast<const unsigned char*>(data.data() + offset);
    offset += 4;
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void append_f64_le(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double read_f64_le(const std::string& data, std::size_t& offset) {
    if (offset + 8 > data.size()) throw FormatError("truncated matrix block");
    const auto* b = reinterpret_cast<const unsigned char*>(data.data() + offset);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    offset += 8;
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path);
}

void require_finite(const Matrix& m, const std::string& where) {
    if (!m.allFinite()) throw DataError("non-finite value in " + where);
}

Matrix parse_csv(const std::string& text, const std::string& path) {
    std::vector<double> values;
    Index rows = 0;
    Index cols = -1;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::size_t len = (eol == std::string::npos ? text.size() : eol) - pos;
        std::string line = text.substr(pos, len);
        pos += len + (eol == std::string::npos ? 0 : 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            if (pos >= text.size()) break;  // trailing newline
            throw FormatError(path + ": empty line " + std::to_string(rows + 1));
        }
        Index row_cols = 0;
        std::size_t field_start = 0;
        while (field_start <= line.size()) {
            std::size_t comma = line.find(',', field_start);
            std::string field = line.substr(
                field_start, (comma == std::string::npos ? line.size() : comma) - field_start);
            const char* cstr = field.c_str();
            char* end = nullptr;
            double v = std::strtod(cstr, &end);
            if (end == cstr || *end != '\0')
                throw FormatError(path + ": bad numeric field '" + field + "' on line " +
                                  std::to_string(rows + 1));
            values.push_back(v);
            ++row_cols;
            if (comma == std::string::npos) break;
            field_start = comma + 1;
        }
        if (cols < 0) cols = row_cols;
        if (row_cols != cols)
            throw FormatError(path + ": line " + std::to_string(rows + 1) + " has " +
                              std::to_string(row_cols) + " fields, expected " + std::to_string(cols));
        ++rows;
    }
    if (rows == 0 || cols <= 0) throw FormatError(path + ": empty matrix");
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = values[static_cast<std::size_t>(i * cols + j)];
    require_finite(m, path);
    return m;
}

std::string render_csv(const Matrix& m) {
    std::string out;
    out.reserve(static_cast<std::size_t>(m.size()) * 8);
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j > 0) out.push_back(',');
            out += format_double(m(i, j));
        }
        out.push_back('\n');
    }
    return out;
}

Matrix take_rows(const Matrix& m, const std::vector<Index>& rows) {
    Matrix out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = m.row(rows[k]);
    return out;
}

std::vector<std::string> take_ids(const std::vector<std::string>& ids,
                                  const std::vector<Index>& rows) {
    std::vector<std::string> out;
    out.reserve(rows.size());
    for (Index r : rows) out.push_back(ids[static_cast<std::size_t>(r)]);
    return out;
}

// Splits one modality: database gets round(fraction*n) documents.
std::pair<std::vector<Index>, std::vector<Index>> split_indices(Index n, double fraction,
                                                                std::uint64_t seed) {
    const Index db_count = static_cast<Index>(std::llround(fraction * static_cast<double>(n)));
    if (db_count <= 0 || db_count >= n)
        throw ConfigError("split fraction " + format_double(fraction) + " leaves an empty side for " +
                          std::to_string(n) + " documents");
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Index> db(order.begin(), order.begin() + db_count);
    std::vector<Index> query(order.begin() + db_count, order.end());
    std::sort(db.begin(), db.end());
    std::sort(query.begin(), query.end());
    return {std::move(db), std::move(query)};
}

// Orthonormal class prototypes: QR of a Gaussian matrix with the R diagonal
// forced positive so the result is deterministic.
Matrix draw_prototypes(Index dim, Index classes, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix g(dim, classes);
    for (Index j = 0; j < classes; ++j)
        for (Index i = 0; i < dim; ++i) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(dim, classes);
    for (Index j = 0; j < classes; ++j)
        if (qr.matrixQR()(j, j) < 0) q.col(j) = -q.col(j);
    return q.transpose();  // classes x dim, orthonormal rows
}

std::string manifest_path_for(const std::string& path) {
    if (fs::is_directory(path)) return (fs::path(path) / "corpus.manifest").string();
    return path;
}

std::vector<std::string> load_id_lines(const std::string& path) {
    std::string text = read_file(path);
    std::vector<std::string> ids;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::size_t len = (eol == std::string::npos ? text.size() : eol) - pos;
        std::string line = text.substr(pos, len);
        pos += len + (eol == std::string::npos ? 0 : 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

std::vector<std::string> default_ids(const char* prefix, Index n) {
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(n));
    char buf[32];
    for (Index i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof(buf), "%s%06lld", prefix, static_cast<long long>(i));
        ids.emplace_back(buf);
    }
    return ids;
}

}  // namespace

MatrixFormat format_for_path(const std::string& path) {
    const std::string ext = fs::path(path).extension().string();
    return ext == ".csv" ? MatrixFormat::csv : MatrixFormat::binary;
}

void append_matrix_block(std::string& out, const Matrix& m) {
    if (m.rows() < 1 || m.cols() < 1) throw DataError("refusing to encode an empty matrix");
    require_finite(m, "matrix block");
    out.append(kMatrixMagic, sizeof(kMatrixMagic));
    append_u32_le(out, static_cast<std::uint32_t>(m.rows()));
    append_u32_le(out, static_cast<std::uint32_t>(m.cols()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) append_f64_le(out, m(i, j));
}

Matrix read_matrix_block(const std::string& data, std::size_t& offset) {
    if (offset + 4 > data.size() ||
        std::memcmp(data.data() + offset, kMatrixMagic, sizeof(kMatrixMagic)) != 0)
        throw FormatError("missing SDSM matrix magic");
    offset += 4;
    const std::uint32_t rows = read_u32_le(data, offset);
    const std::uint32_t cols = read_u32_le(data, offset);
    if (rows == 0 || cols == 0) throw FormatError("matrix block declares an empty matrix");
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::uint32_t i = 0; i < rows; ++i)
        for (std::uint32_t j = 0; j < cols; ++j)
            m(static_cast<Index>(i), static_cast<Index>(j)) = read_f64_le(data, offset);
    require_finite(m, "matrix block");
    return m;
}

Matrix load_matrix(const std::string& path, MatrixFormat format) {
    const std::string bytes = read_file(path);
    if (format == MatrixFormat::csv) return parse_csv(bytes, path);
    std::size_t offset = 0;
    Matrix m = read_matrix_block(bytes, offset);
    if (offset != bytes.size()) throw FormatError(path + ": trailing bytes after matrix payload");
    return m;
}

void store_matrix(const Matrix& m, const std::string& path, MatrixFormat format) {
    if (m.rows() < 1 || m.cols() < 1) throw DataError("refusing to store an empty matrix");
    require_finite(m, "matrix for " + path);
    if (format == MatrixFormat::csv) {
        write_file(path, render_csv(m));
    } else {
        std::string bytes;
        bytes.reserve(12 + static_cast<std::size_t>(m.size()) * 8);
        append_matrix_block(bytes, m);
        write_file(path, bytes);
    }
}

Matrix load_labels(const std::string& path, MatrixFormat format) {
    Matrix labels = load_matrix(path, format);
    validate_labels(labels, path);
    return labels;
}

void validate_labels(const Matrix& labels, const std::string& what) {
    for (Index i = 0; i < labels.rows(); ++i) {
        bool any = false;
        for (Index j = 0; j < labels.cols(); ++j) {
            const double v = labels(i, j);
            if (v != 0.0 && v != 1.0)
                throw DataError(what + ": non-binary label " + format_double(v) + " at row " +
                                std::to_string(i) + ", column " + std::to_string(j));
            any = any || v == 1.0;
        }
        if (!any) throw DataError(what + ": row " + std::to_string(i) + " carries no label");
    }
}

Matrix l2_normalize_rows(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (Index i = 0; i < m.rows(); ++i) {
        const double norm = m.row(i).norm();
        if (norm == 0.0)
            throw DataError("row " + std::to_string(i) + " is all-zero; cannot L2-normalize");
        out.row(i) = m.row(i) / norm;
    }
    return out;
}

void validate_corpus(const Corpus& c) {
    if (c.image_features.rows() < 1 || c.text_features.rows() < 1)
        throw DataError("corpus has an empty modality");
    require_finite(c.image_features, "image features");
    require_finite(c.text_features, "text features");
    if (c.image_features.rows() != c.image_labels.rows())
        throw ShapeError("image features/labels row mismatch: " +
                         std::to_string(c.image_features.rows()) + " vs " +
                         std::to_string(c.image_labels.rows()));
    if (c.text_features.rows() != c.text_labels.rows())
        throw ShapeError("text features/labels row mismatch: " +
                         std::to_string(c.text_features.rows()) + " vs " +
                         std::to_string(c.text_labels.rows()));
    validate_labels(c.image_labels, "image labels");
    validate_labels(c.text_labels, "text labels");
    if (c.image_ids.size() != static_cast<std::size_t>(c.image_features.rows()))
        throw ShapeError("image id count does not match feature rows");
    if (c.text_ids.size() != static_cast<std::size_t>(c.text_features.rows()))
        throw ShapeError("text id count does not match feature rows");
    for (const auto* ids : {&c.image_ids, &c.text_ids}) {
        std::vector<std::string> sorted(*ids);
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw DataError("duplicate document id within a modality");
    }
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& c, const SplitSpec& spec) {
    if (!(spec.database_fraction > 0.0 && spec.database_fraction < 1.0))
        throw ConfigError("database fraction must lie in (0, 1)");
    validate_corpus(c);
    if (c.image_features.rows() < 2 || c.text_features.rows() < 2)
        throw DataError("need at least 2 documents per modality to split");

    auto [img_db, img_q] =
        split_indices(c.image_features.rows(), spec.database_fraction, derive_seed(spec.seed, 0));
    auto [txt_db, txt_q] =
        split_indices(c.text_features.rows(), spec.database_fraction, derive_seed(spec.seed, 1));

    auto subset = [&c](const std::vector<Index>& img, const std::vector<Index>& txt) {
        Corpus out;
        out.image_features = take_rows(c.image_features, img);
        out.image_labels = take_rows(c.image_labels, img);
        out.image_ids = take_ids(c.image_ids, img);
        out.text_features = take_rows(c.text_features, txt);
        out.text_labels = take_rows(c.text_labels, txt);
        out.text_ids = take_ids(c.text_ids, txt);
        return out;
    };
    return {subset(img_db, txt_db), subset(img_q, txt_q)};
}

Corpus generate_synthetic_corpus(Index classes, Index per_class, Index dim_img, Index dim_txt,
                                 double noise, std::uint64_t seed) {
    if (classes < 2) throw ConfigError("need at least 2 classes");
    if (per_class < 2) throw ConfigError("need at least 2 documents per class");
    if (noise < 0.0) throw ConfigError("noise scale must be non-negative");
    if (dim_img < classes || dim_txt < classes)
        throw ConfigError("feature dimension below class count; cannot draw distinct orthonormal prototypes");

    std::mt19937_64 rng(seed);
    const Matrix proto_img = draw_prototypes(dim_img, classes, rng);
    const Matrix proto_txt = draw_prototypes(dim_txt, classes, rng);

    const Index n = classes * per_class;
    std::normal_distribution<double> normal(0.0, 1.0);
    auto make_docs = [&](const Matrix& protos, Index dim) {
        Matrix docs(n, dim);
        for (Index c = 0; c < classes; ++c)
            for (Index k = 0; k < per_class; ++k) {
                Index row = c * per_class + k;
                for (Index j = 0; j < dim; ++j) docs(row, j) = protos(c, j) + noise * normal(rng);
            }
        return l2_normalize_rows(docs);
    };

    Corpus out;
    out.image_features = make_docs(proto_img, dim_img);
    out.text_features = make_docs(proto_txt, dim_txt);
    out.image_labels = Matrix::Zero(n, classes);
    out.text_labels = Matrix::Zero(n, classes);
    for (Index c = 0; c < classes; ++c)
        for (Index k = 0; k < per_class; ++k) {
            out.image_labels(c * per_class + k, c) = 1.0;
            out.text_labels(c * per_class + k, c) = 1.0;
        }
    out.image_ids = default_ids("img_", n);
    out.text_ids = default_ids("txt_", n);
    return out;
}

Corpus load_corpus(const std::string& path) {
    const std::string manifest = manifest_path_for(path);
    const fs::path base = fs::path(manifest).parent_path();
    const std::string text = read_file(manifest);

    std::string img_feat, txt_feat, img_lab, txt_lab, img_ids, txt_ids;
    std::size_t pos = 0;
    int lineno = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::size_t len = (eol == std::string::npos ? text.size() : eol) - pos;
        std::string line = text.substr(pos, len);
        pos += len + (eol == std::string::npos ? 0 : 1);
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError(manifest + ": line " + std::to_string(lineno) + " is not key=value");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "image_features") img_feat = value;
        else if (key == "text_features") txt_feat = value;
        else if (key == "image_labels") img_lab = value;
        else if (key == "text_labels") txt_lab = value;
        else if (key == "image_ids") img_ids = value;
        else if (key == "text_ids") txt_ids = value;
        else throw FormatError(manifest + ": unknown key '" + key + "'");
    }
    for (const auto& [name, value] :
         {std::pair<const char*, const std::string&>{"image_features", img_feat},
          {"text_features", txt_feat},
          {"image_labels", img_lab},
          {"text_labels", txt_lab}})
        if (value.empty()) throw FormatError(manifest + ": missing key '" + std::string(name) + "'");

    auto resolve = [&base](const std::string& rel) { return (base / rel).string(); };
    Corpus c;
    c.image_features = load_matrix(resolve(img_feat), format_for_path(img_feat));
    c.text_features = load_matrix(resolve(txt_feat), format_for_path(txt_feat));
    c.image_labels = load_labels(resolve(img_lab), format_for_path(img_lab));
    c.text_labels = load_labels(resolve(txt_lab), format_for_path(txt_lab));
    c.image_ids = img_ids.empty() ? default_ids("img_", c.image_features.rows())
                                  : load_id_lines(resolve(img_ids));
    c.text_ids = txt_ids.empty() ? default_ids("txt_", c.text_features.rows())
                                 : load_id_lines(resolve(txt_ids));
    validate_corpus(c);
    return c;
}

void store_corpus(const Corpus& c, const std::string& dir) {
    validate_corpus(c);
    fs::create_directories(dir);
    const fs::path base(dir);
    store_matrix(c.image_features, (base / "image_features.sdsm").string(), MatrixFormat::binary);
    store_matrix(c.text_features, (base / "text_features.sdsm").string(), MatrixFormat::binary);
    store_matrix(c.image_labels, (base / "image_labels.csv").string(), MatrixFormat::csv);
    store_matrix(c.text_labels, (base / "text_labels.csv").string(), MatrixFormat::csv);
    std::string ids;
    for (const auto& id : c.image_ids) { ids += id; ids.push_back('\n'); }
    write_file((base / "image_ids.txt").string(), ids);
    ids.clear();
    for (const auto& id : c.text_ids) { ids += id; ids.push_back('\n'); }
    write_file((base / "text_ids.txt").string(), ids);
    write_file((base / "corpus.manifest").string(),
               "image_features=image_features.sdsm\n"
               "text_features=text_features.sdsm\n"
               "image_labels=image_labels.csv\n"
               "text_labels=text_labels.csv\n"
               "image_ids=image_ids.txt\n"
               "text_ids=text_ids.txt\n");
}

}  // namespace sdsrl
