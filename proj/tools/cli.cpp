// Copyright 2026-present the appmorph project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "appmorph/ann.hpp"
#include "appmorph/catalog.hpp"
#include "appmorph/embed_io.hpp"
#include "appmorph/error.hpp"
#include "appmorph/eval.hpp"
#include "appmorph/fixture.hpp"
#include "appmorph/matcher.hpp"
#include "appmorph/sha256.hpp"
#include "appmorph/taxonomy.hpp"
#include "appmorph/textvec.hpp"
#include "json.hpp"

#ifndef APPMORPH_VERSION
#define APPMORPH_VERSION "0.0.0"
#endif

namespace appmorph::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// JSON config files: nested objects address subcommands, so
// {"match": {"alpha": 4}} sets `match --alpha 4`.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config: ") + e.what());
    }
    std::vector<CLI::ConfigItem> items;
    flatten(j, "", {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
  }

  static void flatten(const json& j, const std::string& name, std::vector<std::string> parents,
                      std::vector<CLI::ConfigItem>& out) {
    if (j.is_object()) {
      if (!name.empty()) parents.push_back(name);
      for (const auto& [key, value] : j.items()) flatten(value, key, parents, out);
      return;
    }
    CLI::ConfigItem item;
    item.parents = std::move(parents);
    item.name = name;
    if (j.is_array()) {
      for (const auto& v : j) item.inputs.push_back(scalar(v));
    } else {
      item.inputs.push_back(scalar(j));
    }
    out.push_back(std::move(item));
  }
};

// ---------------------------------------------------------------------------
// Run manifest

bool is_run_manifest(const fs::path& p) {
  const std::string name = p.filename().string();
  return name == "manifest.json" || name.ends_with(".manifest.json");
}

class Manifest {
 public:
  void input(const fs::path& p) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file() && !is_run_manifest(e.path())) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) inputs_[f.string()] = to_hex(sha256_file(f));
    } else {
      inputs_[p.string()] = to_hex(sha256_file(p));
    }
  }
  void output(const fs::path& p) { outputs_.push_back(p.string()); }
  void note(const std::string& key, json value) { notes_[key] = std::move(value); }

  void write(const fs::path& path, const std::string& command, const CLI::App& sub,
             std::uint64_t seed) const {
    json config = json::object();
    for (const CLI::Option* opt : sub.get_options()) {
      const std::string name = opt->get_single_name();
      if (name.empty() || name == "help" || name == "manifest") continue;
      if (opt->count() > 0) {
        const auto& r = opt->results();
        config[name] = r.size() == 1 ? json(r.front()) : json(r);
      } else {
        config[name] = opt->get_default_str();
      }
    }
    json m;
    m["tool"] = "appmorph";
    m["version"] = APPMORPH_VERSION;
    m["command"] = command;
    m["config"] = std::move(config);
    m["seed"] = seed;
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    if (!notes_.empty()) m["notes"] = notes_;
    m["timestamp"] = timestamp();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << m.dump(2) << '\n';
  }

 private:
  static std::string timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
  json notes_ = json::object();
};

// ---------------------------------------------------------------------------
// File helpers

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_text(const fs::path& p, const std::string& text) {
  ensure_parent(p);
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
  if (!out) throw DataError("write failed: " + p.string());
}

void require(const fs::path& p) {
  if (!fs::exists(p)) throw DataError("no such file or directory: " + p.string());
}

std::vector<json> read_jsonl(const fs::path& p) {
  require(p);
  std::ifstream in(p);
  std::vector<json> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError(p.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<std::string> read_id_list(const fs::path& p) {
  require(p);
  std::ifstream in(p);
  std::vector<std::string> ids;
  for (std::string line; std::getline(in, line);) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

fs::path emb_path(const fs::path& dir, ModalityKind m) {
  return dir / (std::string(modality_name(m)) + ".emb1");
}

fs::path ivf_path(const fs::path& dir, ModalityKind m) {
  return dir / (std::string(modality_name(m)) + ".ivf");
}

ModalitySets load_sets(const fs::path& dir) {
  ModalitySets sets;
  for (auto m : kAllModalities) {
    const fs::path p = emb_path(dir, m);
    if (!fs::exists(p)) throw DataError("missing embedding file " + p.string());
    sets[static_cast<std::size_t>(m)] = read_embeddings(p);
    if (sets[static_cast<std::size_t>(m)].modality() != m) {
      throw DataError(p.string() + " holds " +
                      std::string(modality_name(sets[static_cast<std::size_t>(m)].modality())) +
                      " embeddings");
    }
  }
  return sets;
}

std::vector<std::pair<std::string, std::string>> read_truth(const fs::path& p) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& j : read_jsonl(p)) {
    try {
      out.emplace_back(j.at("old_id").get<std::string>(), j.at("new_id").get<std::string>());
    } catch (const json::exception& e) {
      throw DataError(p.string() + ": " + e.what());
    }
  }
  return out;
}

std::string verdict_line(const std::string& query_id, const MatchVerdict& v, std::uint64_t seed) {
  json j;
  j["query_id"] = query_id;
  j["verdict"] = v ? "match" : "no_match";
  if (v) {
    j["match_id"] = v->app_id;
    j["occurrence_count"] = v->occurrence_count;
    j["rating_delta"] = v->rating_delta;
    j["fallback_used"] = v->fallback_used;
  }
  j["seed"] = seed;
  return j.dump();
}

std::string verdicts_jsonl(const MatchRun& run, std::uint64_t seed) {
  std::string out;
  for (const auto& r : run.results) {
    out += verdict_line(r.query_id, r.verdict, query_seed(seed, r.query_id));
    out += '\n';
  }
  return out;
}

std::string candidates_jsonl(const MatchRun& run) {
  std::string out;
  for (const auto& r : run.results) {
    json j;
    j["query_id"] = r.query_id;
    j["seed"] = r.voted.rng_seed;
    j["candidates"] = json::array();
    for (const auto& c : r.voted.items) {
      j["candidates"].push_back({{"app_id", c.app_id},
                                 {"occurrence_count", c.occurrence_count},
                                 {"dev_bonus", c.dev_bonus},
                                 {"position", c.position}});
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::map<std::string, MatchVerdict> read_verdicts(const fs::path& p) {
  std::map<std::string, MatchVerdict> out;
  for (const auto& j : read_jsonl(p)) {
    try {
      MatchVerdict v;
      const auto kind = j.at("verdict").get<std::string>();
      if (kind == "match") {
        v = Match{j.at("match_id").get<std::string>(), j.value("occurrence_count", 0),
                  j.value("rating_delta", std::int64_t{0}), j.value("fallback_used", false)};
      } else if (kind != "no_match") {
        throw DataError(p.string() + ": unknown verdict '" + kind + "'");
      }
      out[j.at("query_id").get<std::string>()] = std::move(v);
    } catch (const json::exception& e) {
      throw DataError(p.string() + ": " + e.what());
    }
  }
  return out;
}

std::map<std::string, VotedCandidates> read_candidates(const fs::path& p) {
  std::map<std::string, VotedCandidates> out;
  for (const auto& j : read_jsonl(p)) {
    try {
      VotedCandidates v;
      v.rng_seed = j.at("seed").get<std::uint64_t>();
      for (const auto& c : j.at("candidates")) {
        v.items.push_back({c.at("app_id").get<std::string>(), c.at("occurrence_count").get<int>(),
                           c.at("dev_bonus").get<bool>(), c.at("position").get<std::size_t>()});
      }
      out[j.at("query_id").get<std::string>()] = std::move(v);
    } catch (const json::exception& e) {
      throw DataError(p.string() + ": " + e.what());
    }
  }
  return out;
}

std::vector<int> parse_alphas(const std::string& spec) {
  std::vector<int> out;
  try {
    if (auto dots = spec.find(".."); dots != std::string::npos) {
      const int lo = std::stoi(spec.substr(0, dots));
      const int hi = std::stoi(spec.substr(dots + 2));
      for (int a = lo; a <= hi; ++a) out.push_back(a);
    } else {
      std::stringstream ss(spec);
      for (std::string part; std::getline(ss, part, ',');) out.push_back(std::stoi(part));
    }
  } catch (const std::logic_error&) {
    throw CLI::ValidationError("--alphas", "expected 'lo..hi' or a comma list, got '" + spec + "'");
  }
  if (out.empty()) throw CLI::ValidationError("--alphas", "no values");
  for (int a : out) {
    if (a < 1 || a > 5) throw CLI::ValidationError("--alphas", "values must lie in [1,5]");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Options shared by several subcommands

struct MatchOpts {
  MatchConfig cfg;
  std::size_t workers = 0;

  void add(CLI::App* app) {
    app->add_option("--k", cfg.k, "Neighbors per modality");
    app->add_option("--alpha", cfg.alpha, "Occurrence count threshold");
    app->add_option("--nprobe", cfg.nprobe, "Lists probed per query (0 = index default)");
    app->add_option("--seed", cfg.seed, "Tie-break seed");
    app->add_option("--workers", workers, "Worker threads (0 = all cores)");
  }
};

struct IvfOpts {
  IvfParams params;

  void add(CLI::App* app) {
    app->add_option("--nlist", params.nlist, "Coarse lists (0 = sqrt(N))");
    app->add_option("--index-nprobe", params.nprobe, "Default nprobe stored in the index");
    app->add_option("--iters", params.kmeans_iters, "k-means iterations");
    app->add_option("--index-seed", params.seed, "k-means seed");
    app->add_option("--max-train", params.max_train_points, "k-means sample cap (0 = 256*nlist)");
  }
};

struct SplitOpts {
  fs::path old_catalog, new_catalog, truth, old_emb, new_emb;
  std::size_t distractors = 0;
  std::uint64_t split_seed = 0;

  void add(CLI::App* app) {
    app->add_option("--old-catalog", old_catalog, "Old snapshot catalog")->required();
    app->add_option("--new-catalog", new_catalog, "New snapshot catalog")->required();
    app->add_option("--truth", truth, "Truth pairs JSONL {old_id, new_id}")->required();
    app->add_option("--old-emb", old_emb, "Directory of old-snapshot .emb1 files");
    app->add_option("--new-emb", new_emb, "Directory of new-snapshot .emb1 files");
    app->add_option("--distractors", distractors, "Distractor apps per gallery")->required();
    app->add_option("--split-seed", split_seed, "Distractor sampling seed");
  }
};

struct Command {
  CLI::App* app = nullptr;
  std::string name;
  std::function<void(Manifest&)> body;
  std::function<fs::path()> manifest_path;
  std::function<std::uint64_t()> seed;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-snapshot app matching and metamorphosis analysis", "appmorph"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config; nested objects address subcommands");
  app.set_version_flag("--version", APPMORPH_VERSION);
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  std::vector<Command> commands;
  fs::path manifest_override;
  auto add_manifest_flag = [&](CLI::App* sub) {
    sub->add_option("--manifest", manifest_override, "Run manifest path");
  };

  // ingest ------------------------------------------------------------------
  struct {
    fs::path input, out, rejects;
    std::string label = "catalog";
    std::size_t top_k = 0;
  } ingest;
  {
    auto* sub = app.add_subcommand("ingest", "Validate a raw catalog and write the canonical form");
    sub->add_option("--input", ingest.input, "Raw JSONL catalog")->required();
    sub->add_option("--label", ingest.label, "Snapshot label");
    sub->add_option("--out", ingest.out, "Canonical catalog JSONL")->required();
    sub->add_option("--rejects", ingest.rejects, "JSONL of rejected records");
    sub->add_option("--top-k", ingest.top_k, "Keep the k most popular apps (0 = all)");
    add_manifest_flag(sub);
    commands.push_back({sub, "ingest", [&](Manifest& m) {
      require(ingest.input);
      m.input(ingest.input);
      std::vector<RejectedRecord> rejected;
      Catalog cat = load_catalog(ingest.input, ingest.label, &rejected);
      if (ingest.top_k) cat = Catalog(ingest.label, top_k(cat, ingest.top_k));
      save_catalog(cat, ingest.out);
      m.output(ingest.out);
      if (!ingest.rejects.empty()) {
        std::string text;
        for (const auto& r : rejected) {
          text += json{{"line", r.line}, {"app_id", r.app_id}, {"reason", r.reason}}.dump() + "\n";
        }
        write_text(ingest.rejects, text);
        m.output(ingest.rejects);
      }
      m.note("records", cat.size());
      m.note("rejected", rejected.size());
      out << "ingested " << cat.size() << " records, rejected " << rejected.size() << '\n';
    }, [&] { return fs::path(ingest.out.string() + ".manifest.json"); }, [] { return 0ull; }});
  }

  // tfidf -------------------------------------------------------------------
  auto* tfidf = app.add_subcommand("tfidf", "Fit or apply a TF-IDF name model");
  tfidf->require_subcommand(1);
  struct {
    std::vector<fs::path> catalogs;
    fs::path model, catalog, out;
    std::string field = "app_name";
    std::string corpus_field = "description";
    std::size_t vocab = kDefaultVocabularySize;
    int ngram_max = kDefaultNgramMax;
  } tf;
  auto field_of = [](const AppRecord& r, const std::string& field) -> const std::string& {
    if (field == "description") return r.description;
    return field == "developer_name" ? r.developer_name : r.app_name;
  };
  const std::vector<std::string> fields = {"app_name", "developer_name"};
  const std::vector<std::string> corpus_fields = {"description", "app_name", "developer_name"};
  {
    auto* sub = tfidf->add_subcommand("fit", "Fit a vocabulary and idf weights");
    sub->add_option("--catalog", tf.catalogs, "Catalog(s) whose field is the corpus")->required();
    sub->add_option("--field", tf.corpus_field, "Corpus field: description, app_name or developer_name")
        ->check(CLI::IsMember(corpus_fields));
    sub->add_option("--vocab", tf.vocab, "Vocabulary size");
    sub->add_option("--ngram-max", tf.ngram_max, "Longest word n-gram");
    sub->add_option("--out", tf.out, "Model JSON")->required();
    add_manifest_flag(sub);
    commands.push_back({sub, "tfidf fit", [&](Manifest& m) {
      std::vector<std::string> corpus;
      for (const auto& p : tf.catalogs) {
        require(p);
        m.input(p);
        const Catalog cat = load_catalog(p, "corpus");
        for (const auto& r : cat.records()) corpus.push_back(field_of(r, tf.corpus_field));
      }
      const TfIdfModel model = fit_tfidf(corpus, tf.vocab, tf.ngram_max);
      ensure_parent(tf.out);
      model.save(tf.out);
      m.output(tf.out);
      out << "vocabulary " << model.terms().size() << " terms from " << corpus.size() << " documents\n";
    }, [&] { return fs::path(tf.out.string() + ".manifest.json"); }, [] { return 0ull; }});
  }
  {
    auto* sub = tfidf->add_subcommand("transform", "Write dense TF-IDF rows as an EMB1 file");
    sub->add_option("--model", tf.model, "Model JSON")->required();
    sub->add_option("--catalog", tf.catalog, "Catalog to vectorize")->required();
    sub->add_option("--field", tf.field, "app_name or developer_name")
        ->check(CLI::IsMember(fields));
    sub->add_option("--out", tf.out, "EMB1 output")->required();
    add_manifest_flag(sub);
    commands.push_back({sub, "tfidf transform", [&](Manifest& m) {
      require(tf.model);
      require(tf.catalog);
      m.input(tf.model);
      m.input(tf.catalog);
      const TfIdfModel model = TfIdfModel::load(tf.model);
      const Catalog cat = load_catalog(tf.catalog, "catalog");
      const ModalityKind kind =
          tf.field == "developer_name" ? ModalityKind::DeveloperName : ModalityKind::AppName;
      EmbeddingSet set(kind, model.capacity());
      set.reserve(cat.size());
      for (const auto& r : cat.records()) set.add(r.app_id, transform(model, field_of(r, tf.field)).to_dense());
      ensure_parent(tf.out);
      write_embeddings(set, tf.out);
      m.output(tf.out);
    }, [&] { return fs::path(tf.out.string() + ".manifest.json"); }, [] { return 0ull; }});
  }

  // synth -------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate synthetic embeddings and fixtures");
  synth->require_subcommand(1);
  struct {
    FixtureSpec spec;
    std::vector<std::size_t> dims;
    fs::path out_dir, catalog, out;
    std::string modality;
    std::size_t dim = 0;
    std::uint64_t seed = 0;
    double drift = 0.0;
  } sy;
  {
    auto* sub = synth->add_subcommand("fixture", "Planted-match corpus with catalogs and embeddings");
    sub->add_option("--pairs", sy.spec.pairs, "Planted pairs");
    sub->add_option("--distractors", sy.spec.distractors, "New-snapshot distractor apps");
    sub->add_option("--drift", sy.spec.drift, "Cross-snapshot drift in [0,1]");
    sub->add_option("--seed", sy.spec.seed, "Fixture seed");
    sub->add_option("--dims", sy.dims, "Dimensions in modality-tag order (5 values)")
        ->expected(5)->delimiter(',');
    sub->add_option("--out-dir", sy.out_dir, "Output directory")->required();
    add_manifest_flag(sub);
    commands.push_back({sub, "synth fixture", [&](Manifest& m) {
      if (!sy.dims.empty()) std::copy(sy.dims.begin(), sy.dims.end(), sy.spec.dims.begin());
      const Fixture f = make_fixture(sy.spec);
      for (const auto& [side, cat, sets] :
           {std::tuple{"old", &f.old_catalog, &f.old_sets}, std::tuple{"new", &f.new_catalog, &f.new_sets}}) {
        const fs::path dir = sy.out_dir / side;
        fs::create_directories(dir / "emb");
        save_catalog(*cat, dir / "catalog.jsonl");
        m.output(dir / "catalog.jsonl");
        for (auto mod : kAllModalities) {
          write_embeddings(for_modality(*sets, mod), emb_path(dir / "emb", mod));
          m.output(emb_path(dir / "emb", mod));
        }
      }
      std::string truth;
      for (const auto& [a, b] : f.truth_pairs) truth += json{{"old_id", a}, {"new_id", b}}.dump() + "\n";
      write_text(sy.out_dir / "truth.jsonl", truth);
      m.output(sy.out_dir / "truth.jsonl");
      out << "fixture: " << f.old_catalog.size() << " queries, " << f.new_catalog.size()
          << " new-snapshot apps\n";
    }, [&] { return sy.out_dir / "manifest.json"; }, [&] { return sy.spec.seed; }});
  }
  {
    auto* sub = synth->add_subcommand("embeddings", "Synthetic embeddings for one catalog");
    sub->add_option("--catalog", sy.catalog, "Catalog JSONL")->required();
    sub->add_option("--modality", sy.modality, "Modality name")->required();
    sub->add_option("--dim", sy.dim, "Dimension (0 = modality default)");
    sub->add_option("--seed", sy.seed, "Seed");
    sub->add_option("--drift", sy.drift, "Snapshot drift in [0,1]");
    sub->add_option("--out", sy.out, "EMB1 output")->required();
    add_manifest_flag(sub);
    commands.push_back({sub, "synth embeddings", [&](Manifest& m) {
      require(sy.catalog);
      m.input(sy.catalog);
      const ModalityKind mod = parse_modality(sy.modality);
      const Catalog cat = load_catalog(sy.catalog, "catalog");
      ensure_parent(sy.out);
      write_embeddings(synth_embeddings(cat, mod, sy.dim ? sy.dim : default_dim(mod), sy.seed, sy.drift),
                       sy.out);
      m.output(sy.out);
    }, [&] { return fs::path(sy.out.string() + ".manifest.json"); }, [&] { return sy.seed; }});
  }

  // index -------------------------------------------------------------------
  auto* index = app.add_subcommand("index", "Build, merge and query IVF indexes");
  index->require_subcommand(1);
  struct {
    IvfOpts ivf;
    fs::path embeddings, out, index, queries, ids;
    std::vector<fs::path> shards;
    std::size_t shard_rows = kDefaultShardRows;
    std::size_t k = 5, nprobe = 0;
  } ix;
  {
    auto* sub = index->add_subcommand("build", "Train centroids and index one embedding file");
    sub->add_option("--embeddings", ix.embeddings, "EMB1 input")->required();
    sub->add_option("--out", ix.out, "IVF1 output")->required();
    sub->add_option("--shard-rows", ix.shard_rows, "Rows per shard before merging");
    ix.ivf.add(sub);
    add_manifest_flag(sub);
    commands.push_back({sub, "index build", [&](Manifest& m) {
      require(ix.embeddings);
      m.input(ix.embeddings);
      if (ix.shard_rows == 0) throw CLI::ValidationError("--shard-rows", "must be >= 1");
      const EmbeddingSet set = read_embeddings(ix.embeddings);
      ensure_parent(ix.out);
      if (set.size() <= ix.shard_rows) {
        const IvfIndex built = build_index(set, ix.ivf.params);
        write_index(built, ix.out);
        m.note("nlist", built.nlist());
      } else {
        const IvfParams params = ix.ivf.params.resolved(set.size());
        const Centroids centroids = train(set, params);
        std::vector<fs::path> paths;
        for (std::size_t lo = 0, s = 0; lo < set.size(); lo += ix.shard_rows, ++s) {
          const std::size_t hi = std::min(set.size(), lo + ix.shard_rows);
          std::vector<std::string> ids(set.ids().begin() + lo, set.ids().begin() + hi);
          paths.push_back(ix.out.string() + ".shard" + std::to_string(s));
          build_shard(subset(set, ids), centroids, params, paths.back());
        }
        merge_shards(paths, ix.out);
        for (const auto& p : paths) fs::remove(p);
        m.note("nlist", params.nlist);
        m.note("shards", paths.size());
      }
      m.output(ix.out);
    }, [&] { return fs::path(ix.out.string() + ".manifest.json"); }, [&] { return ix.ivf.params.seed; }});
  }
  {
    auto* sub = index->add_subcommand("merge", "Merge shards trained on the same centroids");
    sub->add_option("--shards", ix.shards, "IVF1 shard files")->required();
    sub->add_option("--out", ix.out, "Merged IVF1 output")->required();
    add_manifest_flag(sub);
    commands.push_back({sub, "index merge", [&](Manifest& m) {
      for (const auto& p : ix.shards) {
        require(p);
        m.input(p);
      }
      ensure_parent(ix.out);
      const IvfIndex merged = merge_shards(ix.shards, ix.out);
      m.note("rows", merged.size());
      m.output(ix.out);
    }, [&] { return fs::path(ix.out.string() + ".manifest.json"); }, [] { return 0ull; }});
  }
  {
    auto* sub = index->add_subcommand("query", "Top-k neighbors for query embeddings");
    sub->add_option("--index", ix.index, "IVF1 index")->required();
    sub->add_option("--queries", ix.queries, "EMB1 query embeddings")->required();
    sub->add_option("--ids", ix.ids, "File of query ids, one per line (default: all)");
    sub->add_option("--k", ix.k, "Neighbors per query");
    sub->add_option("--nprobe", ix.nprobe, "Lists probed (0 = index default)");
    sub->add_option("--out", ix.out, "Neighbors JSONL")->required();
    add_manifest_flag(sub);
    commands.push_back({sub, "index query", [&](Manifest& m) {
      require(ix.index);
      require(ix.queries);
      m.input(ix.index);
      m.input(ix.queries);
      const IvfIndex idx = read_index(ix.index);
      const EmbeddingSet qs = read_embeddings(ix.queries);
      std::vector<std::string> ids = qs.ids();
      if (!ix.ids.empty()) {
        m.input(ix.ids);
        ids = read_id_list(ix.ids);
      }
      std::string text;
      for (const auto& id : ids) {
        const auto row = qs.find_row(id);
        if (!row) throw DataError("no query embedding for '" + id + "'");
        json j;
        j["query_id"] = id;
        j["neighbors"] = json::array();
        for (const auto& n : idx.query(*row, ix.k, ix.nprobe)) {
          j["neighbors"].push_back({{"app_id", n.app_id}, {"similarity", n.similarity}});
        }
        text += j.dump() + "\n";
      }
      write_text(ix.out, text);
      m.output(ix.out);
    }, [&] { return fs::path(ix.out.string() + ".manifest.json"); }, [] { return 0ull; }});
  }

  // match -------------------------------------------------------------------
  struct {
    MatchOpts opts;
    fs::path old_catalog, new_catalog, query_emb, index_dir, queries, out, candidates_out;
  } mt;
  {
    auto* sub = app.add_subcommand("match", "Vote over per-modality neighbors and decide matches");
    sub->add_option("--old-catalog", mt.old_catalog, "Query snapshot catalog")->required();
    sub->add_option("--new-catalog", mt.new_catalog, "Gallery snapshot catalog")->required();
    sub->add_option("--query-emb", mt.query_emb, "Directory of query .emb1 files")->required();
    sub->add_option("--index-dir", mt.index_dir, "Directory of gallery .ivf files")->required();
    sub->add_option("--queries", mt.queries, "File of query ids (default: whole old catalog)");
    sub->add_option("--out", mt.out, "Verdicts JSONL")->required();
    sub->add_option("--candidates-out", mt.candidates_out, "Voted candidate lists JSONL");
    mt.opts.add(sub);
    add_manifest_flag(sub);
    commands.push_back({sub, "match", [&](Manifest& m) {
      validate(mt.opts.cfg);
      for (const auto& p : {mt.old_catalog, mt.new_catalog, mt.query_emb, mt.index_dir}) {
        require(p);
        m.input(p);
      }
      const Catalog old_cat = load_catalog(mt.old_catalog, "old");
      const Catalog new_cat = load_catalog(mt.new_catalog, "new");
      const ModalitySets qsets = load_sets(mt.query_emb);
      std::array<IvfIndex, 5> indexes;
      for (auto mod : kAllModalities) {
        const fs::path p = ivf_path(mt.index_dir, mod);
        if (!fs::exists(p)) throw DataError("missing index file " + p.string());
        indexes[static_cast<std::size_t>(mod)] = read_index(p);
      }
      std::vector<AppRecord> queries;
      if (mt.queries.empty()) {
        queries = old_cat.records();
      } else {
        m.input(mt.queries);
        queries = gather(old_cat, read_id_list(mt.queries));
      }
      const MatchRun run =
          match_all(queries, index_pointers(indexes), qsets, new_cat, mt.opts.cfg, mt.opts.workers);
      write_text(mt.out, verdicts_jsonl(run, mt.opts.cfg.seed));
      m.output(mt.out);
      if (!mt.candidates_out.empty()) {
        write_text(mt.candidates_out, candidates_jsonl(run));
        m.output(mt.candidates_out);
      }
      std::size_t matched = 0;
      for (const auto& r : run.results) matched += r.verdict.has_value();
      m.note("queries", queries.size());
      m.note("matched", matched);
      m.note("skipped", run.skipped);
      out << "matched " << matched << " of " << run.results.size() << " queries";
      if (!run.skipped.empty()) out << " (" << run.skipped.size() << " skipped: missing embeddings)";
      out << '\n';
    }, [&] { return fs::path(mt.out.string() + ".manifest.json"); }, [&] { return mt.opts.cfg.seed; }});
  }

  // classify ----------------------------------------------------------------
  struct {
    fs::path old_catalog, new_catalog, verdicts, candidates, tfidf, old_emb, new_emb, out;
    TaxonomyThresholds thresholds;
    SuccessParams success;
  } cl;
  auto add_success = [](CLI::App* sub, SuccessParams& s) {
    sub->add_option("--years", s.years, "Years between snapshots");
    sub->add_option("--eco-initial", s.eco_initial, "Ecosystem downloads at the old snapshot");
    sub->add_option("--eco-final", s.eco_final, "Ecosystem downloads at the new snapshot");
  };
  {
    auto* sub = app.add_subcommand("classify", "Label each query with outcomes and metamorphoses");
    sub->add_option("--old-catalog", cl.old_catalog, "Old snapshot catalog")->required();
    sub->add_option("--new-catalog", cl.new_catalog, "New snapshot catalog")->required();
    sub->add_option("--verdicts", cl.verdicts, "Verdicts JSONL from match")->required();
    sub->add_option("--candidates", cl.candidates, "Candidate lists JSONL from match");
    sub->add_option("--tfidf", cl.tfidf, "TF-IDF model JSON for name/developer similarity")->required();
    sub->add_option("--old-emb", cl.old_emb, "Old-snapshot embedding directory");
    sub->add_option("--new-emb", cl.new_emb, "New-snapshot embedding directory");
    sub->add_option("--out", cl.out, "Classifications JSONL")->required();
    sub->add_option("--name-threshold", cl.thresholds.name, "Name similarity ceiling");
    sub->add_option("--icon-threshold", cl.thresholds.icon, "Icon similarity ceiling");
    sub->add_option("--desc-hi", cl.thresholds.desc_hi, "Description band upper edge");
    sub->add_option("--desc-lo", cl.thresholds.desc_lo, "Description band lower edge");
    sub->add_option("--transfer-threshold", cl.thresholds.transfer, "Developer similarity floor");
    sub->add_option("--dev-sim", cl.thresholds.dev_sim, "Variant developer similarity floor");
    add_success(sub, cl.success);
    add_manifest_flag(sub);
    commands.push_back({sub, "classify", [&](Manifest& m) {
      validate(cl.thresholds);
      for (const auto& p : {cl.old_catalog, cl.new_catalog, cl.verdicts, cl.tfidf}) {
        require(p);
        m.input(p);
      }
      const Catalog old_cat = load_catalog(cl.old_catalog, "old");
      const Catalog new_cat = load_catalog(cl.new_catalog, "new");
      const auto verdicts = read_verdicts(cl.verdicts);
      std::map<std::string, VotedCandidates> voted;
      if (!cl.candidates.empty()) {
        m.input(cl.candidates);
        voted = read_candidates(cl.candidates);
      }
      const TfIdfModel model = TfIdfModel::load(cl.tfidf);
      EmbeddingSet icon_old, icon_new, desc_old, desc_new;
      ClassifyContext ctx;
      ctx.new_catalog = &new_cat;
      ctx.tfidf = &model;
      ctx.thresholds = cl.thresholds;
      ctx.success = cl.success;
      if (!cl.old_emb.empty() && !cl.new_emb.empty()) {
        for (const auto& [dir, icon, desc] :
             {std::tuple{&cl.old_emb, &icon_old, &desc_old}, std::tuple{&cl.new_emb, &icon_new, &desc_new}}) {
          const fs::path ip = emb_path(*dir, ModalityKind::IconContent);
          const fs::path dp = emb_path(*dir, ModalityKind::Description);
          require(ip);
          require(dp);
          m.input(ip);
          m.input(dp);
          *icon = read_embeddings(ip);
          *desc = read_embeddings(dp);
        }
        ctx.icon_old = &icon_old;
        ctx.icon_new = &icon_new;
        ctx.desc_old = &desc_old;
        ctx.desc_new = &desc_new;
      }
      std::string text;
      for (const auto& [qid, verdict] : verdicts) {
        const AppRecord* q = old_cat.find(qid);
        if (!q) throw DataError("verdict for '" + qid + "' which is not in the old catalog");
        auto it = voted.find(qid);
        text += to_json_line(classify_query(*q, verdict, it == voted.end() ? nullptr : &it->second, ctx));
        text += '\n';
      }
      write_text(cl.out, text);
      m.output(cl.out);
    }, [&] { return fs::path(cl.out.string() + ".manifest.json"); }, [] { return 0ull; }});
  }

  // score -------------------------------------------------------------------
  struct {
    fs::path old_catalog, new_catalog, verdicts, out;
    SuccessParams success;
  } sc;
  {
    auto* sub = app.add_subcommand("score", "Success scores of matched pairs");
    sub->add_option("--old-catalog", sc.old_catalog, "Old snapshot catalog")->required();
    sub->add_option("--new-catalog", sc.new_catalog, "New snapshot catalog")->required();
    sub->add_option("--verdicts", sc.verdicts, "Verdicts JSONL from match")->required();
    sub->add_option("--out", sc.out, "Scores JSONL")->required();
    add_success(sub, sc.success);
    add_manifest_flag(sub);
    commands.push_back({sub, "score", [&](Manifest& m) {
      for (const auto& p : {sc.old_catalog, sc.new_catalog, sc.verdicts}) {
        require(p);
        m.input(p);
      }
      const Catalog old_cat = load_catalog(sc.old_catalog, "old");
      const Catalog new_cat = load_catalog(sc.new_catalog, "new");
      std::string text;
      for (const auto& [qid, verdict] : read_verdicts(sc.verdicts)) {
        if (!verdict) continue;
        const AppRecord* q = old_cat.find(qid);
        const AppRecord* n = new_cat.find(verdict->app_id);
        if (!q || !n) throw DataError("verdict pair '" + qid + "' -> '" + verdict->app_id + "' not in catalogs");
        json j;
        j["query_id"] = qid;
        j["match_id"] = verdict->app_id;
        if (const auto s = success_score(*q, *n, sc.success)) {
          APPMORPH_CHECK(ss_identity_holds(*s), "success score identity");
          j["cagr_downloads"] = s->cagr_downloads;
          j["cagr_ratings"] = s->cagr_ratings;
          j["cagr_ecosystem"] = s->cagr_ecosystem;
          j["ss"] = s->ss;
        } else {
          j["ss"] = nullptr;
          j["reason"] = "no_baseline";
        }
        text += j.dump() + "\n";
      }
      write_text(sc.out, text);
      m.output(sc.out);
    }, [&] { return fs::path(sc.out.string() + ".manifest.json"); }, [] { return 0ull; }});
  }

  // evaluate / ablate -------------------------------------------------------
  struct {
    SplitOpts split;
    MatchOpts opts;
    IvfOpts ivf;
    fs::path out_dir;
    std::vector<std::string> variants;
    std::string alphas = "1..5";
  } ev;
  auto load_split_inputs = [&](Manifest& m) {
    for (const auto& p : {ev.split.old_catalog, ev.split.new_catalog, ev.split.truth}) {
      require(p);
      m.input(p);
    }
    return std::tuple{load_catalog(ev.split.old_catalog, "old"), load_catalog(ev.split.new_catalog, "new"),
                      read_truth(ev.split.truth)};
  };
  {
    auto* sub = app.add_subcommand("evaluate", "Match and no-match scenario metrics");
    ev.split.add(sub);
    ev.opts.add(sub);
    ev.ivf.add(sub);
    sub->add_option("--out-dir", ev.out_dir, "Output directory")->required();
    add_manifest_flag(sub);
    commands.push_back({sub, "evaluate", [&](Manifest& m) {
      validate(ev.opts.cfg);
      if (ev.split.old_emb.empty() || ev.split.new_emb.empty()) {
        throw CLI::ValidationError("--old-emb/--new-emb", "both embedding directories are required");
      }
      auto [old_cat, new_cat, truth] = load_split_inputs(m);
      m.input(ev.split.old_emb);
      m.input(ev.split.new_emb);
      const ModalitySets old_sets = load_sets(ev.split.old_emb);
      const ModalitySets new_sets = load_sets(ev.split.new_emb);
      const EvalSplit with = build_eval_split(old_cat, new_cat, truth, ev.split.distractors,
                                              ev.split.split_seed, false);
      const EvalSplit without = build_eval_split(old_cat, new_cat, truth, ev.split.distractors,
                                                 ev.split.split_seed, true);
      auto run_split = [&](const EvalSplit& s) {
        const auto indexes = build_gallery_indexes(new_sets, s.gallery_ids, ev.ivf.params);
        return match_all(gather(old_cat, s.query_ids), index_pointers(indexes), old_sets, new_cat,
                         ev.opts.cfg, ev.opts.workers);
      };
      const MatchRun mrun = run_split(with);
      const MatchRun nrun = run_split(without);
      const EvalReport report = make_report(score_match_scenario(mrun.verdicts(), with.truth),
                                            score_no_match_scenario(nrun.verdicts(), without.query_ids));
      fs::create_directories(ev.out_dir);
      const json full = json::parse(report_json(report));
      write_text(ev.out_dir / "confusion.json", full.at("confusion").dump(2) + "\n");
      json metrics_json;
      metrics_json["match"] = full.at("match");
      metrics_json["no_match"] = full.at("no_match");
      metrics_json["harmonic_mean"] = full.at("harmonic_mean");
      write_text(ev.out_dir / "metrics.json", metrics_json.dump(2) + "\n");
      write_text(ev.out_dir / "match_verdicts.jsonl", verdicts_jsonl(mrun, ev.opts.cfg.seed));
      write_text(ev.out_dir / "no_match_verdicts.jsonl", verdicts_jsonl(nrun, ev.opts.cfg.seed));
      for (const char* f : {"confusion.json", "metrics.json", "match_verdicts.jsonl", "no_match_verdicts.jsonl"}) {
        m.output(ev.out_dir / f);
      }
      out << "A@1 " << report.match.accuracy << "  P@1 " << report.match.precision << "  R@1 "
          << report.match.recall << "  no-match R@1 " << report.no_match.recall() << "  HM "
          << report.harmonic_mean << '\n';
    }, [&] { return ev.out_dir / "manifest.json"; }, [&] { return ev.opts.cfg.seed; }});
  }
  {
    auto* sub = app.add_subcommand("ablate", "Harmonic-mean table over embedding variants and alpha");
    ev.split.add(sub);
    ev.opts.add(sub);
    ev.ivf.add(sub);
    sub->add_option("--variant", ev.variants, "name=OLD_DIR,NEW_DIR (repeatable)");
    sub->add_option("--alphas", ev.alphas, "Alpha values: 'lo..hi' or a comma list");
    sub->add_option("--out-dir", ev.out_dir, "Output directory")->required();
    add_manifest_flag(sub);
    commands.push_back({sub, "ablate", [&](Manifest& m) {
      const std::vector<int> alphas = parse_alphas(ev.alphas);
      auto [old_cat, new_cat, truth] = load_split_inputs(m);
      std::vector<std::tuple<std::string, fs::path, fs::path>> specs;
      for (const auto& v : ev.variants) {
        const auto eq = v.find('=');
        const auto comma = v.find(',', eq == std::string::npos ? 0 : eq);
        if (eq == std::string::npos || comma == std::string::npos) {
          throw CLI::ValidationError("--variant", "expected name=OLD_DIR,NEW_DIR, got '" + v + "'");
        }
        specs.emplace_back(v.substr(0, eq), v.substr(eq + 1, comma - eq - 1), v.substr(comma + 1));
      }
      if (specs.empty()) {
        if (ev.split.old_emb.empty() || ev.split.new_emb.empty()) {
          throw CLI::ValidationError("--variant", "give --variant or both --old-emb and --new-emb");
        }
        specs.emplace_back("default", ev.split.old_emb, ev.split.new_emb);
      }
      std::vector<std::unique_ptr<ModalitySets>> storage;
      std::vector<EmbeddingVariant> variants;
      for (const auto& [name, od, nd] : specs) {
        require(od);
        require(nd);
        m.input(od);
        m.input(nd);
        storage.push_back(std::make_unique<ModalitySets>(load_sets(od)));
        storage.push_back(std::make_unique<ModalitySets>(load_sets(nd)));
        variants.push_back({name, storage[storage.size() - 2].get(), storage.back().get()});
      }
      const EvalSplit with = build_eval_split(old_cat, new_cat, truth, ev.split.distractors,
                                              ev.split.split_seed, false);
      const EvalSplit without = build_eval_split(old_cat, new_cat, truth, ev.split.distractors,
                                                 ev.split.split_seed, true);
      AblationOptions opts;
      opts.ivf = ev.ivf.params;
      opts.match = ev.opts.cfg;
      opts.workers = ev.opts.workers;
      const AblationTable table = ablate(old_cat, new_cat, with, without, variants, alphas, opts);
      fs::create_directories(ev.out_dir);
      write_text(ev.out_dir / "ablation.csv", table.to_csv());
      write_text(ev.out_dir / "ablation_long.csv", table.to_long_csv());
      const auto [r, c] = table.best();
      const AblationCell& cell = table.rows[r].cells[c];
      json best{{"variant", table.rows[r].variant},
                {"alpha", cell.alpha},
                {"match_accuracy", cell.match_accuracy},
                {"no_match_recall", cell.no_match_recall},
                {"harmonic_mean", cell.harmonic_mean}};
      write_text(ev.out_dir / "best.json", best.dump(2) + "\n");
      for (const char* f : {"ablation.csv", "ablation_long.csv", "best.json"}) m.output(ev.out_dir / f);
      out << table.to_csv();
    }, [&] { return ev.out_dir / "manifest.json"; }, [&] { return ev.opts.cfg.seed; }});
  }

  // report ------------------------------------------------------------------
  struct {
    fs::path classifications, old_catalog, new_catalog, risk_map, out_dir;
  } rp;
  {
    auto* sub = app.add_subcommand("report", "Outcome census, success-score CDFs, permission deltas");
    sub->add_option("--classifications", rp.classifications, "Classifications JSONL")->required();
    sub->add_option("--old-catalog", rp.old_catalog, "Old snapshot catalog (for permissions)");
    sub->add_option("--new-catalog", rp.new_catalog, "New snapshot catalog (for permissions)");
    sub->add_option("--risk-map", rp.risk_map, "Permission risk map JSON");
    sub->add_option("--out-dir", rp.out_dir, "Output directory")->required();
    add_manifest_flag(sub);
    commands.push_back({sub, "report", [&](Manifest& m) {
      require(rp.classifications);
      m.input(rp.classifications);
      std::vector<QueryClassification> rows;
      for (const auto& j : read_jsonl(rp.classifications)) rows.push_back(classification_from_json(j.dump()));
      fs::create_directories(rp.out_dir);
      json census = json::object();
      for (const auto& [k, v] : outcome_census(rows)) census[k] = v;
      write_text(rp.out_dir / "census.json", census.dump(2) + "\n");
      write_text(rp.out_dir / "ss_cdf.csv", success_cdf_csv(rows));
      m.output(rp.out_dir / "census.json");
      m.output(rp.out_dir / "ss_cdf.csv");
      if (rp.old_catalog.empty() != rp.new_catalog.empty()) {
        throw CLI::ValidationError("--old-catalog/--new-catalog", "give both or neither");
      }
      if (!rp.old_catalog.empty()) {
        for (const auto& p : {rp.old_catalog, rp.new_catalog}) {
          require(p);
          m.input(p);
        }
        RiskCategoryMap risk;
        if (!rp.risk_map.empty()) {
          require(rp.risk_map);
          m.input(rp.risk_map);
          risk = RiskCategoryMap::load(rp.risk_map);
        }
        const Catalog old_cat = load_catalog(rp.old_catalog, "old");
        const Catalog new_cat = load_catalog(rp.new_catalog, "new");
        std::map<std::string, std::vector<RecordPair>> cohorts;
        for (const auto& r : rows) {
          if (!r.counterpart_id) continue;
          const AppRecord* a = old_cat.find(r.query_id);
          const AppRecord* b = new_cat.find(*r.counterpart_id);
          if (!a || !b) throw DataError("classified pair '" + r.query_id + "' not in catalogs");
          cohorts["all"].emplace_back(*a, *b);
          for (auto l : r.labels) cohorts[std::string(label_name(l))].emplace_back(*a, *b);
        }
        json deltas = json::object();
        for (const auto& [label, pairs] : cohorts) {
          json tiers = json::array();
          for (const auto& d : permission_risk_delta(pairs, risk)) {
            json t{{"tier", d.tier}, {"before", d.before}, {"after", d.after}};
            t["pct_change"] = d.pct_change ? json(*d.pct_change) : json(nullptr);
            t["new_tier"] = d.new_tier;
            tiers.push_back(std::move(t));
          }
          deltas[label] = {{"pairs", pairs.size()}, {"tiers", std::move(tiers)}};
        }
        write_text(rp.out_dir / "permission_deltas.json", deltas.dump(2) + "\n");
        m.output(rp.out_dir / "permission_deltas.json");
      }
      for (const auto& [k, v] : outcome_census(rows)) out << k << ' ' << v << '\n';
    }, [&] { return rp.out_dir / "manifest.json"; }, [] { return 0ull; }});
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kOk;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  const Command* chosen = nullptr;
  for (const auto& c : commands) {
    if (c.app->parsed()) chosen = &c;
  }
  if (!chosen) {
    err << app.help();
    return kUsage;
  }
  try {
    Manifest manifest;
    chosen->body(manifest);
    const fs::path mpath = manifest_override.empty() ? chosen->manifest_path() : manifest_override;
    ensure_parent(mpath);
    manifest.write(mpath, chosen->name, *chosen->app, chosen->seed());
    return kOk;
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n' << chosen->app->help();
    return kUsage;
  } catch (const InvariantError& e) {
    err << "internal error: " << e.what() << '\n';
    return kInvariant;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const json::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInvariant;
  }
}

}  // namespace appmorph::cli
