#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ehrsurv/errors.hpp"
#include "ehrsurv/matrix.hpp"

namespace ehrsurv {

// One EHR data type (diagnosis codes, notes, labs, ...) with its vocabulary.
struct Vocabulary {
  int modality_id = 0;
  std::vector<std::string> feature_ids;            // index -> feature id
  std::unordered_map<std::string, int> feature_index;

  int size() const { return static_cast<int>(feature_ids.size()); }

  // Validates uniqueness and builds the reverse index.
  static Vocabulary build(int modality_id, std::vector<std::string> feature_ids);
};

// A token type: all instances of one feature within one (patient, modality),
// stored as (feature index, count). Inference iterates types, not instances.
struct TokenGroup {
  int feature = 0;
  std::int64_t count = 0;
};

struct PatientRecord {
  std::string patient_id;
  std::vector<std::vector<TokenGroup>> tokens;   // per modality, ascending feature index
  std::vector<std::int64_t> tokens_per_modality; // N^(m)

  std::int64_t total_tokens() const {
    std::int64_t n = 0;
    for (auto c : tokens_per_modality) n += c;
    return n;
  }
};

struct Corpus {
  std::vector<Vocabulary> vocabularies;  // modality m stored at index m
  std::vector<PatientRecord> patients;   // sorted by patient_id

  int num_modalities() const { return static_cast<int>(vocabularies.size()); }
  std::size_t num_patients() const { return patients.size(); }
  const PatientRecord* find(const std::string& patient_id) const;
};

struct SurvivalOutcome {
  std::string patient_id;
  double time = 0.0;  // days, > 0
  int event = 0;      // 1 = event observed, 0 = censored
};

// feature id (guide modality) -> set of phenotype topics; topic index k is the
// lexicographic rank of the phenotype id.
struct GuideMap {
  std::vector<std::string> phenotype_ids;
  std::unordered_map<std::string, std::vector<int>> feature_to_phenotypes;

  std::size_t num_phenotypes() const { return phenotype_ids.size(); }
};

// Vocabulary file: TSV `modality<TAB>feature_id`, modality ids dense from 0.
std::vector<Vocabulary> load_vocabularies(const std::string& path);
void write_vocabularies(const std::vector<Vocabulary>& vocabs, const std::string& path);

// Corpus file: TSV header `patient_id\tmodality\tfeature_id\tcount`.
// Duplicate (patient, modality, feature) rows are summed. Unknown features and
// malformed rows raise DataError naming the line number.
Corpus load_corpus(const std::string& path, std::vector<Vocabulary> schema);
void write_corpus(const Corpus& corpus, const std::string& path);

// Survival file: TSV `patient_id\ttime\tevent`; every corpus patient exactly
// once; returned in corpus order.
std::vector<SurvivalOutcome> load_survival(const std::string& path, const Corpus& corpus);
void write_survival(const std::vector<SurvivalOutcome>& outcomes, const std::string& path);

// Guide map file: TSV `feature_id\tphenotype_id`, one mapping pair per row.
GuideMap load_guide_map(const std::string& path);

// u_jk = count of patient j's guide-modality tokens mapping to phenotype k,
// with multiplicity; multi-mapped tokens increment every mapped phenotype.
Matrix phecode_counts(const Corpus& corpus, const GuideMap& guide, int guide_modality);

// Optional preprocessing filter: drops phenotype columns observed (u_jk > 0)
// in more than max_prevalence of patients; returns kept column indices.
std::vector<int> filter_prevalent_phenotypes(const Matrix& u, double max_prevalence);

}  // namespace ehrsurv
