#pragma once

#include "sdsrl/common.hpp"

#include <string>
#include <utility>
#include <vector>

namespace sdsrl {

// On-disk matrix encodings.
//   csv    — UTF-8, comma separated, one row per line, no header, '.' decimal
//            separator, values printed with 17 significant digits.
//   binary — "SDSM" magic, u32 LE rows, u32 LE cols, rows*cols f64 LE
//            row-major. Round-trips bit-exactly.
enum class MatrixFormat { csv, binary };

// Picks csv for a ".csv" suffix, binary otherwise.
MatrixFormat format_for_path(const std::string& path);

Matrix load_matrix(const std::string& path, MatrixFormat format);
void store_matrix(const Matrix& m, const std::string& path, MatrixFormat format);

// In-memory codec for one binary matrix block; shared with the model artifact.
void append_matrix_block(std::string& out, const Matrix& m);
Matrix read_matrix_block(const std::string& data, std::size_t& offset);

// Labels use the same file grammar with entries restricted to {0,1}.
Matrix load_labels(const std::string& path, MatrixFormat format);

// Every entry in {0,1} and every row carries at least one label.
void validate_labels(const Matrix& labels, const std::string& what);

// Scales every row to unit Euclidean norm. A zero row is an error naming the
// offending row: it has no direction and would silently corrupt RBF geometry.
Matrix l2_normalize_rows(const Matrix& m);

struct SplitSpec {
    double database_fraction = 0.75;
    std::uint64_t seed = 0;
};

// Two feature sets with per-document labels. The modalities need not be
// paired or equally sized; supervision flows only through the labels.
struct Corpus {
    Matrix image_features;
    Matrix text_features;
    Matrix image_labels;
    Matrix text_labels;
    std::vector<std::string> image_ids;
    std::vector<std::string> text_ids;
};

void validate_corpus(const Corpus& c);

// Seeded uniform partition per modality: round(fraction*n) documents to the
// database side, the rest to the query side, document order preserved.
std::pair<Corpus, Corpus> split_corpus(const Corpus& c, const SplitSpec& spec);

// Desk-scale corpus: one random orthonormal prototype direction per class and
// modality, documents are the prototype plus Gaussian noise re-normalized to
// unit length, labels one-hot. Deterministic for a fixed seed.
Corpus generate_synthetic_corpus(Index classes, Index per_class, Index dim_img,
                                 Index dim_txt, double noise,
                                 std::uint64_t seed);

// Corpus manifest: key=value lines naming the four matrix files and optional
// id lists (one id per line), paths relative to the manifest. `path` may be
// the manifest itself or a directory containing "corpus.manifest".
Corpus load_corpus(const std::string& path);
void store_corpus(const Corpus& c, const std::string& dir);

}  // namespace sdsrl
