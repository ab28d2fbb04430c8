#include "ehrsurv/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace ehrsurv {

namespace {

std::vector<std::string> split_tab(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') {
    out.back().pop_back();
  }
  return out;
}

std::int64_t parse_int(const std::string& s, const std::string& context, std::size_t line_no) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw DataError(context + ": expected integer, got '" + s + "' at line " +
                    std::to_string(line_no));
  }
  return value;
}

double parse_double(const std::string& s, const std::string& context, std::size_t line_no) {
  try {
    std::size_t used = 0;
    double value = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return value;
  } catch (const std::exception&) {
    throw DataError(context + ": expected number, got '" + s + "' at line " +
                    std::to_string(line_no));
  }
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  return in;
}

}  // namespace

Vocabulary Vocabulary::build(int modality_id, std::vector<std::string> feature_ids) {
  Vocabulary v;
  v.modality_id = modality_id;
  v.feature_ids = std::move(feature_ids);
  if (v.feature_ids.empty()) {
    throw DataError("modality " + std::to_string(modality_id) + " declares an empty vocabulary");
  }
  for (std::size_t i = 0; i < v.feature_ids.size(); ++i) {
    auto [it, inserted] = v.feature_index.emplace(v.feature_ids[i], static_cast<int>(i));
    if (!inserted) {
      throw DataError("duplicate feature '" + v.feature_ids[i] + "' in modality " +
                      std::to_string(modality_id));
    }
  }
  return v;
}

const PatientRecord* Corpus::find(const std::string& patient_id) const {
  auto it = std::lower_bound(patients.begin(), patients.end(), patient_id,
                             [](const PatientRecord& p, const std::string& id) {
                               return p.patient_id < id;
                             });
  if (it == patients.end() || it->patient_id != patient_id) return nullptr;
  return &*it;
}

std::vector<Vocabulary> load_vocabularies(const std::string& path) {
  auto in = open_or_throw(path);
  std::map<int, std::vector<std::string>> features;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cols = split_tab(line);
    if (cols.size() != 2) {
      throw DataError(path + ": expected 2 columns at line " + std::to_string(line_no));
    }
    int m = static_cast<int>(parse_int(cols[0], path, line_no));
    if (m < 0) throw DataError(path + ": negative modality at line " + std::to_string(line_no));
    features[m].push_back(cols[1]);
  }
  if (features.empty()) throw DataError(path + ": no vocabulary rows");
  int expected = 0;
  std::vector<Vocabulary> out;
  for (auto& [m, ids] : features) {
    if (m != expected) {
      throw DataError(path + ": modality ids must be dense from 0; missing " +
                      std::to_string(expected));
    }
    out.push_back(Vocabulary::build(m, std::move(ids)));
    ++expected;
  }
  return out;
}

void write_vocabularies(const std::vector<Vocabulary>& vocabs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  for (const auto& v : vocabs) {
    for (const auto& f : v.feature_ids) {
      out << v.modality_id << '\t' << f << '\n';
    }
  }
}

Corpus load_corpus(const std::string& path, std::vector<Vocabulary> schema) {
  auto in = open_or_throw(path);
  if (schema.empty()) throw DataError("corpus schema declares no modalities");

  Corpus corpus;
  corpus.vocabularies = std::move(schema);
  const int M = corpus.num_modalities();

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError(path + ": missing header");
  ++line_no;
  {
    auto cols = split_tab(line);
    const std::vector<std::string> expected = {"patient_id", "modality", "feature_id", "count"};
    if (cols.size() != 4 || !std::equal(cols.begin(), cols.end(), expected.begin())) {
      throw DataError(path + ": bad header, expected patient_id\\tmodality\\tfeature_id\\tcount");
    }
  }

  // patient -> modality -> feature -> count, summed over duplicate rows
  std::map<std::string, std::vector<std::map<int, std::int64_t>>> acc;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cols = split_tab(line);
    if (cols.size() != 4) {
      throw DataError(path + ": expected 4 columns at line " + std::to_string(line_no));
    }
    int m = static_cast<int>(parse_int(cols[1], path, line_no));
    if (m < 0 || m >= M) {
      throw DataError(path + ": unknown modality " + cols[1] + " at line " +
                      std::to_string(line_no));
    }
    auto it = corpus.vocabularies[m].feature_index.find(cols[2]);
    if (it == corpus.vocabularies[m].feature_index.end()) {
      throw DataError(path + ": unknown feature_id '" + cols[2] + "' for modality " + cols[1] +
                      " at line " + std::to_string(line_no));
    }
    std::int64_t count = parse_int(cols[3], path, line_no);
    if (count <= 0) {
      throw DataError(path + ": count must be positive at line " + std::to_string(line_no));
    }
    auto& per_modality = acc[cols[0]];
    if (per_modality.empty()) per_modality.resize(M);
    per_modality[m][it->second] += count;
  }

  corpus.patients.reserve(acc.size());
  for (auto& [pid, per_modality] : acc) {
    PatientRecord rec;
    rec.patient_id = pid;
    rec.tokens.resize(M);
    rec.tokens_per_modality.assign(M, 0);
    for (int m = 0; m < M; ++m) {
      for (auto [feature, count] : per_modality[m]) {
        rec.tokens[m].push_back({feature, count});
        rec.tokens_per_modality[m] += count;
      }
    }
    corpus.patients.push_back(std::move(rec));
  }
  // std::map already yields patients sorted by patient_id.
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << "patient_id\tmodality\tfeature_id\tcount\n";
  for (const auto& p : corpus.patients) {
    for (int m = 0; m < corpus.num_modalities(); ++m) {
      for (const auto& tg : p.tokens[m]) {
        out << p.patient_id << '\t' << m << '\t'
            << corpus.vocabularies[m].feature_ids[tg.feature] << '\t' << tg.count << '\n';
      }
    }
  }
}

std::vector<SurvivalOutcome> load_survival(const std::string& path, const Corpus& corpus) {
  auto in = open_or_throw(path);
  std::unordered_map<std::string, SurvivalOutcome> by_id;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cols = split_tab(line);
    if (first && cols.size() >= 1 && cols[0] == "patient_id") {
      first = false;
      continue;  // optional header
    }
    first = false;
    if (cols.size() != 3) {
      throw DataError(path + ": expected 3 columns at line " + std::to_string(line_no));
    }
    SurvivalOutcome o;
    o.patient_id = cols[0];
    o.time = parse_double(cols[1], path, line_no);
    std::int64_t ev = parse_int(cols[2], path, line_no);
    if (o.time <= 0.0) {
      throw DataError(path + ": time must be > 0 for patient '" + o.patient_id + "' at line " +
                      std::to_string(line_no));
    }
    if (ev != 0 && ev != 1) {
      throw DataError(path + ": event must be 0 or 1 at line " + std::to_string(line_no));
    }
    o.event = static_cast<int>(ev);
    if (!by_id.emplace(o.patient_id, o).second) {
      throw DataError(path + ": duplicate patient '" + o.patient_id + "' at line " +
                      std::to_string(line_no));
    }
  }
  std::vector<SurvivalOutcome> out;
  out.reserve(corpus.num_patients());
  for (const auto& p : corpus.patients) {
    auto it = by_id.find(p.patient_id);
    if (it == by_id.end()) {
      throw DataError(path + ": missing survival record for patient '" + p.patient_id + "'");
    }
    out.push_back(it->second);
  }
  return out;
}

void write_survival(const std::vector<SurvivalOutcome>& outcomes, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << "patient_id\ttime\tevent\n";
  out.precision(17);
  for (const auto& o : outcomes) {
    out << o.patient_id << '\t' << o.time << '\t' << o.event << '\n';
  }
}

GuideMap load_guide_map(const std::string& path) {
  auto in = open_or_throw(path);
  std::set<std::string> phenotypes;
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cols = split_tab(line);
    if (cols.size() != 2) {
      throw DataError(path + ": expected 2 columns at line " + std::to_string(line_no));
    }
    phenotypes.insert(cols[1]);
    pairs.emplace_back(cols[0], cols[1]);
  }
  if (phenotypes.empty()) throw DataError(path + ": guide map has no mapping rows");

  GuideMap guide;
  guide.phenotype_ids.assign(phenotypes.begin(), phenotypes.end());  // lexicographic
  std::unordered_map<std::string, int> index;
  for (std::size_t k = 0; k < guide.phenotype_ids.size(); ++k) {
    index[guide.phenotype_ids[k]] = static_cast<int>(k);
  }
  for (auto& [feature, phenotype] : pairs) {
    auto& list = guide.feature_to_phenotypes[feature];
    int k = index[phenotype];
    if (std::find(list.begin(), list.end(), k) == list.end()) list.push_back(k);
  }
  for (auto& [feature, list] : guide.feature_to_phenotypes) {
    std::sort(list.begin(), list.end());
  }
  return guide;
}

Matrix phecode_counts(const Corpus& corpus, const GuideMap& guide, int guide_modality) {
  if (guide_modality < 0 || guide_modality >= corpus.num_modalities()) {
    throw DataError("guide modality " + std::to_string(guide_modality) + " is not declared");
  }
  const std::size_t P = corpus.num_patients();
  const std::size_t K = guide.num_phenotypes();
  Matrix u(P, K, 0.0);
  const auto& vocab = corpus.vocabularies[guide_modality];
  for (std::size_t j = 0; j < P; ++j) {
    for (const auto& tg : corpus.patients[j].tokens[guide_modality]) {
      auto it = guide.feature_to_phenotypes.find(vocab.feature_ids[tg.feature]);
      if (it == guide.feature_to_phenotypes.end()) continue;  // unmapped: contributes nothing
      for (int k : it->second) u(j, static_cast<std::size_t>(k)) += static_cast<double>(tg.count);
    }
  }
  return u;
}

std::vector<int> filter_prevalent_phenotypes(const Matrix& u, double max_prevalence) {
  std::vector<int> kept;
  const double P = static_cast<double>(u.rows());
  for (std::size_t k = 0; k < u.cols(); ++k) {
    std::size_t observed = 0;
    for (std::size_t j = 0; j < u.rows(); ++j) {
      if (u(j, k) > 0) ++observed;
    }
    if (P == 0.0 || static_cast<double>(observed) / P <= max_prevalence) {
      kept.push_back(static_cast<int>(k));
    }
  }
  return kept;
}

}  // namespace ehrsurv
