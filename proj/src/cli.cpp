#include "commrec/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include "commrec/community.hpp"
#include "commrec/corpus.hpp"
#include "commrec/error.hpp"
#include "commrec/eval.hpp"
#include "commrec/features.hpp"
#include "commrec/hetgraph.hpp"
#include "commrec/maxent.hpp"
#include "commrec/rankfeatures.hpp"
#include "commrec/ranker.hpp"
#include "commrec/rng.hpp"
#include "commrec/simgen.hpp"
#include "commrec/textrank.hpp"

namespace commrec::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class MissingInput : public Error {
 public:
  explicit MissingInput(const fs::path& path) : Error("missing_input", "missing input: " + path.string()) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message) : Error("usage", message) {}
};

json group_weights_json(const std::vector<GroupWeight>& groups) {
  json out = json::array();
  for (const auto& g : groups) out.push_back({{"group", std::string(to_string(g.group))}, {"weight", g.weight}});
  return out;
}

std::vector<GroupWeight> group_weights_from(const json& doc) {
  std::vector<GroupWeight> out;
  for (const auto& entry : doc) {
    const auto name = entry.at("group").get<std::string>();
    auto id = parse_feature_group(name);
    if (!id) throw InvalidArgument("unknown feature group '" + name + "'");
    out.push_back({*id, entry.value("weight", 1.0)});
  }
  return out;
}

/// Parsed command-line state shared by all subcommands.
struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<std::size_t> k;
  std::optional<std::size_t> folds;
  std::optional<std::size_t> k_loc;
  std::optional<double> lambda;
  std::optional<double> mu;
  std::optional<double> k1;
  std::optional<double> b;
  std::optional<std::size_t> restarts;
  std::optional<std::size_t> min_queries;
  std::optional<double> fraction;
  std::optional<std::string> mode;
  std::optional<std::size_t> readers;
  std::optional<double> alpha;
  std::optional<double> noise;
  std::vector<std::string> sets;
  // recommend
  std::string paper;
  std::string quote;
  std::optional<int> community;
  std::string candidates;
  std::size_t top = 10;
};

void set_path(json& config, const std::string& dotted, json value) {
  json* node = &config;
  std::stringstream ss(dotted);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw UsageError("empty override key");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    json& child = (*node)[parts[i]];
    if (!child.is_object()) child = json::object();
    node = &child;
  }
  (*node)[parts.back()] = std::move(value);
}

/// Applies flag overrides to the config and returns them as an echo object.
json apply_overrides(json& config, const Flags& f) {
  json echo = json::object();
  auto put = [&](const std::string& key, const json& value) {
    set_path(config, key, value);
    echo[key] = value;
  };
  if (f.seed) put("seed", *f.seed);
  if (f.k) put("clustering.k", *f.k);
  if (f.folds) put("eval.folds", *f.folds);
  if (f.k_loc) put("features.k_loc", *f.k_loc);
  if (f.lambda) put("maxent.lambda", *f.lambda);
  if (f.mu) put("text.mu", *f.mu);
  if (f.k1) put("text.k1", *f.k1);
  if (f.b) put("text.b", *f.b);
  if (f.restarts) put("ranker.restarts", *f.restarts);
  if (f.min_queries) put("ranker.min_judged_queries", *f.min_queries);
  if (f.fraction) put("eval.fraction", *f.fraction);
  if (f.mode) put("eval.mode", *f.mode);
  if (f.readers) put("simulate.readers", *f.readers);
  if (f.alpha) put("simulate.alpha", *f.alpha);
  if (f.noise) put("simulate.grade_noise", *f.noise);
  for (const auto& assignment : f.sets) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + assignment + "'");
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    put(assignment.substr(0, eq), value);
  }
  return echo;
}

/// Files staged in memory and written together when a stage succeeds.
class Outputs {
 public:
  void add(const fs::path& path, std::string content) { files_.emplace_back(path, std::move(content)); }
  void add_json(const fs::path& path, const json& doc) { add(path, doc.dump(2) + "\n"); }
  const std::vector<std::pair<fs::path, std::string>>& files() const { return files_; }

 private:
  std::vector<std::pair<fs::path, std::string>> files_;
};

struct Context {
  json config;
  json overrides;
  std::uint64_t seed = 0;
  std::string hash;
  fs::path out;
  std::ostream* log = nullptr;
  /// Files written by this invocation, removed if it fails.
  std::vector<fs::path> written;
  bool force_out_paths = false;

  std::uint64_t stage_seed(std::string_view stage) const { return fork_seed(seed, stage); }

  json provenance(std::string_view stage) const {
    return json{{"config_hash", hash},
                {"seed", seed},
                {"stage", stage},
                {"stage_seed", stage_seed(stage)},
                {"overrides", overrides}};
  }

  fs::path path(const std::string& key, const std::string& default_name) const {
    if (!force_out_paths) {
      const auto& paths = config.at("paths");
      if (paths.contains(key) && paths[key].is_string()) return fs::path(paths[key].get<std::string>());
    }
    return out / default_name;
  }

  void commit(std::string_view stage, const Outputs& outputs) {
    fs::create_directories(out);
    json manifest = json::object();
    const fs::path manifest_path = out / "manifest.json";
    if (fs::exists(manifest_path)) {
      std::ifstream in(manifest_path);
      manifest = json::parse(in, nullptr, false);
      if (!manifest.is_object() || manifest.value("config_hash", "") != hash) manifest = json::object();
    }
    manifest["config_hash"] = hash;
    manifest["seed"] = seed;
    manifest["config"] = config;
    manifest["overrides"] = overrides;
    if (!manifest.contains("artifacts")) manifest["artifacts"] = json::object();
    for (const auto& [path, content] : outputs.files()) {
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      const fs::path tmp = path.string() + ".tmp";
      {
        std::ofstream file(tmp, std::ios::binary);
        if (!file) throw Error("io", "cannot write " + path.string());
        file << content;
      }
      fs::rename(tmp, path);
      written.push_back(path);
      manifest["artifacts"][path.filename().string()] = {{"stage", stage}, {"stage_seed", stage_seed(stage)}};
    }
    std::ofstream file(manifest_path, std::ios::binary);
    file << manifest.dump(2) << "\n";
    written.push_back(manifest_path);
  }

  void remove_written() {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    written.clear();
  }
};

std::ifstream open_input(const fs::path& path) {
  if (!fs::exists(path)) throw MissingInput(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput(path);
  return in;
}

json read_json(const fs::path& path) {
  auto in = open_input(path);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ParseError(path.string(), 0, "not valid JSON");
  return doc;
}

struct CorpusInputs {
  bool oers = true;
  bool judgments = true;
};

Corpus load_corpus(const Context& ctx, CorpusInputs need) {
  const fs::path events_path = ctx.path("events", "events.jsonl");
  auto events = open_input(events_path);
  auto optional_stream = [&](const std::string& key, const std::string& name, bool required,
                             std::ifstream& holder) -> std::optional<NamedStream> {
    const fs::path p = ctx.path(key, name);
    if (!fs::exists(p)) {
      if (required) throw MissingInput(p);
      return std::nullopt;
    }
    holder = open_input(p);
    return NamedStream{p.filename().string(), &holder};
  };
  std::ifstream readers;
  std::ifstream oers;
  std::ifstream judgments;
  auto r = optional_stream("readers", "readers.jsonl", false, readers);
  auto o = optional_stream("oers", "oers.jsonl", need.oers, oers);
  auto j = optional_stream("judgments", "judgments.tsv", need.judgments, judgments);
  return parse_corpus(NamedStream{events_path.filename().string(), &events}, r, o, j);
}

HetGraph load_graph_files(const Context& ctx, std::vector<std::string>* warnings) {
  auto vertices = open_input(ctx.path("vertices", "vertices.tsv"));
  auto edges = open_input(ctx.path("edges", "edges.tsv"));
  return load_graph(vertices, edges, warnings);
}

std::vector<MetaPath> load_metapaths(const Context& ctx) {
  const auto& paths = ctx.config.at("paths");
  if (!ctx.force_out_paths && paths.contains("metapaths") && paths["metapaths"].is_string()) {
    return metapaths_from_json(read_json(paths["metapaths"].get<std::string>()));
  }
  const fs::path built = ctx.out / "metapaths.json";
  if (fs::exists(built)) return metapaths_from_json(read_json(built).at("metapaths"));
  return default_metapaths();
}

FeatureSettings feature_settings(const json& config) {
  const auto& f = config.at("features");
  FeatureSettings s;
  s.k_loc = f.at("k_loc").get<std::size_t>();
  s.shared_location_clusters = f.at("shared_location_clusters").get<bool>();
  s.tokenizer = f.at("tokenizer").get<TokenizerSettings>();
  return s;
}

MaxEntOptions maxent_options(const json& config) {
  const auto& m = config.at("maxent");
  return MaxEntOptions{m.at("lambda").get<double>(), m.at("gradient_tolerance").get<double>(),
                       m.at("max_iterations").get<std::size_t>()};
}

TwoStepOptions two_step_options(const json& config) {
  const auto& c = config.at("clustering");
  if (c.at("distance").get<std::string>() != "euclidean") {
    throw InvalidArgument("unsupported distance '" + c.at("distance").get<std::string>() + "'");
  }
  TwoStepOptions o;
  o.k = c.at("k").get<std::size_t>();
  if (o.k == 0) throw InvalidArgument("clustering.k must be at least 1");
  o.kmedoids_restarts = c.at("restarts").get<std::size_t>();
  o.rpf_groups = group_weights_from(config.at("features").at("rpf_groups"));
  o.rbf_groups = group_weights_from(config.at("features").at("rbf_groups"));
  o.maxent = maxent_options(config);
  return o;
}

RankerParams ranker_params(const json& config) {
  const auto& r = config.at("ranker");
  RankerParams p;
  p.ascent.restarts = r.at("restarts").get<std::size_t>();
  p.ascent.metric_k = r.at("metric_k").get<std::size_t>();
  p.ascent.tolerance = r.at("tolerance").get<double>();
  p.ascent.max_sweeps = r.at("max_sweeps").get<std::size_t>();
  p.min_judged_queries = r.at("min_judged_queries").get<std::size_t>();
  return p;
}

TextParams text_params(const json& config) {
  const auto& t = config.at("text");
  return TextParams{t.at("mu").get<double>(), t.at("k1").get<double>(), t.at("b").get<double>()};
}

std::string tsv_of(const std::function<void(std::ostream&)>& writer) {
  std::ostringstream s;
  writer(s);
  return s.str();
}

// ---- stages ----

void stage_simulate(Context& ctx) {
  SimConfig sim = sim_config_from_json(ctx.config.at("simulate"));
  sim.seed = ctx.stage_seed("simulate");
  const SimOutput generated = generate_corpus(sim);
  const Corpus& c = generated.corpus;
  Outputs out;
  out.add(ctx.out / "events.jsonl", tsv_of([&](std::ostream& s) { write_events(s, c); }));
  out.add(ctx.out / "readers.jsonl", tsv_of([&](std::ostream& s) { write_readers(s, c); }));
  out.add(ctx.out / "oers.jsonl", tsv_of([&](std::ostream& s) { write_oers(s, c); }));
  out.add(ctx.out / "judgments.tsv", tsv_of([&](std::ostream& s) { write_judgments(s, c); }));
  out.add(ctx.out / "latent.tsv", tsv_of([&](std::ostream& s) { write_latent(s, generated.latent); }));
  out.add(ctx.out / "vertices.tsv", tsv_of([&](std::ostream& s) { write_vertices(s, generated.graph); }));
  out.add(ctx.out / "edges.tsv", tsv_of([&](std::ostream& s) { write_edges(s, generated.graph); }));
  ctx.commit("simulate", out);
  *ctx.log << "simulate: " << c.readers().size() << " readers, " << c.events().size() << " events, "
           << c.oers().size() << " OERs, " << c.queries().size() << " judged queries -> "
           << ctx.out.string() << "\n";
}

void stage_ingest(Context& ctx) {
  const Corpus corpus = load_corpus(ctx, {false, false});
  const ValidationReport report = validate_corpus(corpus);
  json issues = json::array();
  for (const auto& i : report.issues) issues.push_back({{"kind", i.kind}, {"subject", i.subject}, {"detail", i.detail}});
  json kinds = json::object();
  for (const auto& [kind, n] : report.kind_counts) kinds[std::string(to_string(kind))] = n;
  std::size_t rbf_only = 0;
  for (const auto& r : corpus.readers()) rbf_only += r.has_rpf ? 0 : 1;
  Outputs out;
  out.add_json(ctx.out / "ingest.json", json{{"provenance", ctx.provenance("ingest")},
                                             {"readers", corpus.readers().size()},
                                             {"rbf_only_readers", rbf_only},
                                             {"events", corpus.events().size()},
                                             {"event_kinds", kinds},
                                             {"oers", corpus.oers().size()},
                                             {"judged_queries", corpus.queries().size()},
                                             {"warnings", corpus.warnings()},
                                             {"issues", issues}});
  ctx.commit("ingest", out);
  *ctx.log << "ingest: " << corpus.readers().size() << " readers (" << rbf_only << " without profile), "
           << corpus.events().size() << " events, " << corpus.oers().size() << " OERs, "
           << corpus.queries().size() << " judged queries, " << report.issues.size() << " issues, "
           << corpus.warnings().size() << " warnings\n";
}

void stage_featurize(Context& ctx) {
  const Corpus corpus = load_corpus(ctx, {false, false});
  const FeatureMatrix features = featurize(corpus, feature_settings(ctx.config), ctx.stage_seed("featurize"));
  json doc = features_to_json(features);
  doc["provenance"] = ctx.provenance("featurize");
  Outputs out;
  out.add_json(ctx.out / "features.json", doc);
  ctx.commit("featurize", out);
  std::size_t columns = 0;
  for (const auto& g : features.groups) columns += g.columns.size();
  *ctx.log << "featurize: " << features.reader_ids.size() << " readers, " << features.groups.size()
           << " groups, " << columns << " columns\n";
}

FeatureMatrix load_features(const Context& ctx) {
  return features_from_json(read_json(ctx.path("features", "features.json")));
}

void stage_cluster(Context& ctx) {
  const FeatureMatrix features = load_features(ctx);
  const TwoStepOptions options = two_step_options(ctx.config);
  std::vector<std::string> with_rpf;
  for (std::size_t i = 0; i < features.reader_ids.size(); ++i) {
    if (features.has_rpf[i]) with_rpf.push_back(features.reader_ids[i]);
  }
  const bool on_rbf = with_rpf.size() < options.k;
  const UnifiedVectors vectors =
      on_rbf ? combine_groups(features, options.rbf_groups)
             : select_readers(combine_groups(features, options.rpf_groups), with_rpf);
  CommunityModel model = cluster_readers(vectors, options.k, ctx.stage_seed("cluster"), options.kmedoids_restarts);
  for (const auto& g : on_rbf ? options.rbf_groups : options.rpf_groups) model.source_groups.push_back(g.group);

  json doc = community_model_to_json(model);
  doc["clustered_on_rbf"] = on_rbf;
  doc["provenance"] = ctx.provenance("cluster");
  std::string extra;
  if (fs::exists(ctx.path("events", "events.jsonl"))) {
    const Corpus corpus = load_corpus(ctx, {false, false});
    std::set<ReaderPair> pairs;
    for (const auto& p : reply_pairs(corpus)) {
      if (model.assignment.contains(p.first) && model.assignment.contains(p.second)) pairs.insert(p);
    }
    const PairwiseScores s = pairwise_cluster_eval(model.assignment, pairs);
    doc["pairwise"] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
                       {"same_community_pairs", s.same_community_pairs},
                       {"reply_pairs", s.reply_pair_count}, {"agreeing_pairs", s.agreeing_pairs}};
    std::ostringstream line;
    line << ", reply-pair F1 " << s.f1;
    extra = line.str();
  }
  Outputs out;
  out.add_json(ctx.out / "clusters.json", doc);
  ctx.commit("cluster", out);
  *ctx.log << "cluster: " << model.assignment.size() << " readers into " << model.k << " communities on "
           << (on_rbf ? "RBF" : "RPF") << ", cost " << model.cost << extra << "\n";
}

void stage_train_classifier(Context& ctx) {
  const FeatureMatrix features = load_features(ctx);
  const json clusters = read_json(ctx.path("clusters", "clusters.json"));
  const CommunityModel model = community_model_from_json(clusters);
  const TwoStepOptions options = two_step_options(ctx.config);
  const UnifiedVectors rbf = combine_groups(features, options.rbf_groups);
  const MaxEntModel classifier = train_community_classifier(rbf, model.assignment, model.k, options.maxent);
  json doc = maxent_to_json(classifier);
  doc["rbf_groups"] = group_weights_json(options.rbf_groups);
  doc["provenance"] = ctx.provenance("train-community-classifier");
  Outputs out;
  out.add_json(ctx.out / "maxent.json", doc);
  ctx.commit("train-community-classifier", out);
  *ctx.log << "train-community-classifier: " << model.assignment.size() << " labeled readers, "
           << classifier.convergence.iterations << " iterations, "
           << (classifier.convergence.converged ? "converged" : "not converged") << ", objective "
           << classifier.convergence.objective << "\n";
}

void stage_assign(Context& ctx) {
  const FeatureMatrix features = load_features(ctx);
  const CommunityModel model = community_model_from_json(read_json(ctx.path("clusters", "clusters.json")));
  std::map<std::string, int> community;
  std::map<std::string, CommunitySource> source;
  std::vector<std::string> unlabeled;
  for (const auto& r : features.reader_ids) {
    auto it = model.assignment.find(r);
    if (it != model.assignment.end()) {
      community[r] = it->second;
      source[r] = CommunitySource::Clustered;
    } else {
      unlabeled.push_back(r);
    }
  }
  if (!unlabeled.empty()) {
    const json doc = read_json(ctx.path("maxent", "maxent.json"));
    const MaxEntModel classifier = maxent_from_json(doc);
    const auto groups = doc.contains("rbf_groups") ? group_weights_from(doc["rbf_groups"])
                                                   : two_step_options(ctx.config).rbf_groups;
    const UnifiedVectors rbf = select_readers(combine_groups(features, groups), unlabeled);
    for (std::size_t i = 0; i < unlabeled.size(); ++i) {
      community[unlabeled[i]] =
          predict_community(classifier, rbf.rows.row(static_cast<Eigen::Index>(i)).transpose()).label;
      source[unlabeled[i]] = CommunitySource::Predicted;
    }
  }
  Outputs out;
  out.add(ctx.out / "communities.tsv", tsv_of([&](std::ostream& s) { write_communities(s, community, source); }));
  ctx.commit("assign", out);
  *ctx.log << "assign: " << community.size() - unlabeled.size() << " clustered, " << unlabeled.size()
           << " predicted\n";
}

void stage_graph_build(Context& ctx) {
  std::vector<std::string> warnings;
  const HetGraph graph = load_graph_files(ctx, &warnings);
  const std::vector<MetaPath> paths = [&] {
    const auto& p = ctx.config.at("paths");
    if (!ctx.force_out_paths && p.contains("metapaths") && p["metapaths"].is_string()) {
      return metapaths_from_json(read_json(p["metapaths"].get<std::string>()));
    }
    return default_metapaths();
  }();
  for (const auto& path : paths) validate_metapath(graph, path);
  std::map<std::string, std::size_t> kinds;
  for (const auto& v : graph.vertices()) ++kinds[std::string(to_string(v.kind))];
  json edge_types = json::array();
  for (const auto& t : graph.edge_types()) {
    edge_types.push_back({{"name", t.name}, {"from", std::string(to_string(t.from))}, {"to", std::string(to_string(t.to))}});
  }
  Outputs out;
  out.add_json(ctx.out / "graph.json", json{{"provenance", ctx.provenance("graph-build")},
                                            {"vertices", kinds},
                                            {"edges", graph.edge_count()},
                                            {"edge_types", edge_types},
                                            {"warnings", warnings}});
  out.add_json(ctx.out / "metapaths.json",
               json{{"provenance", ctx.provenance("graph-build")}, {"metapaths", metapaths_to_json(paths)}});
  ctx.commit("graph-build", out);
  *ctx.log << "graph-build: " << graph.vertex_count() << " vertices, " << graph.edge_count() << " edges, "
           << paths.size() << " meta-paths\n";
}

void stage_rankfeat(Context& ctx) {
  const Corpus corpus = load_corpus(ctx, {true, true});
  const HetGraph graph = load_graph_files(ctx, nullptr);
  const TextIndex text(corpus, feature_settings(ctx.config).tokenizer);
  const RankFeatureExtractor extractor(graph, text, load_metapaths(ctx), text_params(ctx.config));
  const RankingDataset dataset = build_ranking_dataset(corpus, extractor);
  json doc = dataset_to_json(dataset);
  doc["provenance"] = ctx.provenance("rankfeat");
  Outputs out;
  out.add_json(ctx.out / "rankfeatures.json", doc);
  ctx.commit("rankfeat", out);
  std::size_t candidates = 0;
  for (const auto& q : dataset.queries) candidates += q.oer_ids.size();
  *ctx.log << "rankfeat: " << dataset.queries.size() << " queries, " << candidates << " candidates, "
           << dataset.feature_names.size() << " features\n";
}

std::map<std::string, int> load_communities(const Context& ctx) {
  const fs::path p = ctx.path("communities", "communities.tsv");
  auto in = open_input(p);
  return read_communities(in, p.filename().string()).first;
}

void stage_train_ranker(Context& ctx) {
  const RankingDataset dataset = dataset_from_json(read_json(ctx.path("rankfeatures", "rankfeatures.json")));
  const auto communities = load_communities(ctx);
  CommunityRankerSet set = train_communitized(dataset, communities, ranker_params(ctx.config),
                                              ctx.stage_seed("train-ranker"));
  if (!ctx.config.at("ranker").at("global").get<bool>()) set.global.reset();
  Outputs out;
  json index{{"provenance", ctx.provenance("train-ranker")},
             {"min_judged_queries", set.min_judged_queries},
             {"communities", json::object()},
             {"global", nullptr}};
  auto add_model = [&](const RankingModel& m, const std::string& file) {
    json doc = model_to_json(m);
    doc["provenance"] = ctx.provenance("train-ranker");
    out.add_json(ctx.out / file, doc);
  };
  for (const auto& [c, m] : set.community_models) {
    const std::string file = "model_c" + std::to_string(c) + ".json";
    add_model(m, file);
    index["communities"][std::to_string(c)] = file;
  }
  if (set.global) {
    add_model(*set.global, "model_global.json");
    index["global"] = "model_global.json";
  }
  out.add_json(ctx.out / "rankerset.json", index);
  ctx.commit("train-ranker", out);
  *ctx.log << "train-ranker: " << set.community_models.size() << " community models"
           << (set.global ? " + global" : "") << " on " << dataset.queries.size() << " queries\n";
}

CommunityRankerSet load_rankers(const Context& ctx) {
  const fs::path index_path = ctx.path("rankerset", "rankerset.json");
  const json doc = read_json(index_path);
  const fs::path dir = index_path.parent_path();
  CommunityRankerSet set;
  set.min_judged_queries = doc.value("min_judged_queries", std::size_t{10});
  for (const auto& [key, file] : doc.at("communities").items()) {
    set.community_models.emplace(std::stoi(key), model_from_json(read_json(dir / file.get<std::string>())));
  }
  if (doc.contains("global") && !doc["global"].is_null()) {
    set.global = model_from_json(read_json(dir / doc["global"].get<std::string>()));
  }
  return set;
}

void stage_recommend(Context& ctx, const Flags& flags) {
  if (!flags.community) throw UsageError("recommend needs --community");
  if (flags.paper.empty()) throw UsageError("recommend needs --paper");
  const CommunityRankerSet set = load_rankers(ctx);
  const RankingModel& model = set.resolve(*flags.community);

  const Corpus corpus = load_corpus(ctx, {true, false});
  const HetGraph graph = load_graph_files(ctx, nullptr);
  const TextIndex text(corpus, feature_settings(ctx.config).tokenizer);
  const RankFeatureExtractor extractor(graph, text, load_metapaths(ctx), text_params(ctx.config));
  std::vector<std::string> candidates;
  if (!flags.candidates.empty()) {
    std::stringstream ss(flags.candidates);
    std::string id;
    while (std::getline(ss, id, ',')) {
      if (!id.empty()) candidates.push_back(id);
    }
  } else {
    for (const auto& v : graph.vertices()) {
      if (v.kind == VertexKind::Oer) candidates.push_back(v.id);
    }
  }
  const auto vectors = extractor.extract({flags.paper, flags.quote}, candidates);
  const auto ranked = rank(model, extractor.feature_names(), vectors);
  json list = json::array();
  std::string head;
  for (std::size_t i = 0; i < std::min(flags.top, ranked.size()); ++i) {
    list.push_back({{"oer", ranked[i].oer_id}, {"score", ranked[i].score}});
    if (i < 3) head += " " + ranked[i].oer_id;
  }
  Outputs out;
  out.add_json(ctx.out / "recommendations.json",
               json{{"provenance", ctx.provenance("recommend")},
                    {"query", {{"paper", flags.paper}, {"quote", flags.quote}}},
                    {"community", *flags.community},
                    {"model", model.community_tag},
                    {"ranking", list}});
  ctx.commit("recommend", out);
  *ctx.log << "recommend: community " << *flags.community << " via " << model.community_tag << " model, top"
           << head << "\n";
}

void stage_evaluate(Context& ctx) {
  const RankingDataset dataset = dataset_from_json(read_json(ctx.path("rankfeatures", "rankfeatures.json")));
  const auto& e = ctx.config.at("eval");
  const std::string mode = e.at("mode").get<std::string>();
  CrossValidationOptions cv;
  cv.folds = e.at("folds").get<std::size_t>();
  cv.ranker = ranker_params(ctx.config);
  MetricReport report;
  if (mode == "cv") {
    report = cross_validate_ranking(dataset, load_communities(ctx), cv, ctx.stage_seed("evaluate"));
  } else if (mode == "missing_rpf") {
    SimulationOptions sim;
    sim.fraction = e.at("fraction").get<double>();
    sim.folds = e.at("reader_folds").get<std::size_t>();
    sim.two_step = two_step_options(ctx.config);
    sim.ranking = cv;
    report = simulate_missing_rpf(load_features(ctx), dataset, sim, ctx.stage_seed("evaluate"));
  } else {
    throw InvalidArgument("eval.mode must be 'cv' or 'missing_rpf', got '" + mode + "'");
  }
  json doc = report_to_json(report);
  doc["mode"] = mode;
  doc["provenance"] = ctx.provenance("evaluate");
  doc["settings"] = ctx.config;
  Outputs out;
  out.add_json(ctx.out / "report.json", doc);
  ctx.commit("evaluate", out);
  *ctx.log << "evaluate: " << report.evaluated_queries << " queries (" << report.skipped_queries
           << " skipped), ndcg@3 communitized " << report.communitized.means[kNdcg3Index] << " vs global "
           << report.baseline.means[kNdcg3Index] << ", sign test p " << report.ndcg3_sign_test.p_value;
  if (report.prediction) *ctx.log << ", prediction accuracy " << report.prediction->accuracy;
  *ctx.log << "\n";
}

void stage_pipeline(Context& ctx) {
  ctx.force_out_paths = true;
  stage_simulate(ctx);
  stage_ingest(ctx);
  stage_featurize(ctx);
  stage_cluster(ctx);
  stage_train_classifier(ctx);
  stage_assign(ctx);
  stage_graph_build(ctx);
  stage_rankfeat(ctx);
  stage_train_ranker(ctx);
  stage_evaluate(ctx);
}

void emit_error(std::ostream& err, const std::string& subcommand, const std::string& code,
                const std::string& message) {
  err << "error: " << json{{"subcommand", subcommand}, {"code", code}, {"message", message}}.dump() << "\n";
}

}  // namespace

json default_config() {
  SimConfig sim;
  json sim_json = sim_config_to_json(sim);
  sim_json.erase("seed");
  return json{
      {"seed", nullptr},
      {"paths", json::object()},
      {"features",
       {{"k_loc", 10},
        {"shared_location_clusters", true},
        {"tokenizer", TokenizerSettings{}},
        {"rpf_groups", group_weights_json(default_rpf_groups())},
        {"rbf_groups", group_weights_json(default_rbf_groups())}}},
      {"clustering", {{"k", 3}, {"distance", "euclidean"}, {"restarts", kDefaultKMedoidsRestarts}}},
      {"maxent", {{"lambda", 1.0}, {"gradient_tolerance", 1e-6}, {"max_iterations", 10000}}},
      {"text", {{"mu", 2000.0}, {"k1", 1.2}, {"b", 0.75}}},
      {"ranker",
       {{"restarts", 5}, {"metric_k", 3}, {"tolerance", 1e-5}, {"max_sweeps", 100},
        {"min_judged_queries", 10}, {"global", true}}},
      {"eval", {{"mode", "cv"}, {"folds", 10}, {"fraction", 0.25}, {"reader_folds", 4}}},
      {"simulate", sim_json}};
}

std::string config_hash(const json& config) {
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(fnv1a(config.dump())));
  return buffer;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Community-aware OER recommendation pipeline", "commrec"};
  app.require_subcommand(1, 1);
  Flags flags;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"ingest", "parse and validate the corpus streams"},
      {"featurize", "extract RPF and RBF reader features"},
      {"cluster", "K-medoids communities of readers with profiles"},
      {"train-community-classifier", "MaxEnt classifier from RBF to community"},
      {"assign", "community of every reader, predicted where no profile exists"},
      {"graph-build", "load and check the paper/topic/OER graph"},
      {"rankfeat", "ranking features for every judged query"},
      {"train-ranker", "community and global coordinate-ascent rankers"},
      {"recommend", "rank OERs for one query"},
      {"evaluate", "cross-validated comparison against the global ranker"},
      {"simulate", "generate a synthetic corpus and graph"},
      {"pipeline", "simulate and run every stage through evaluate"}};

  for (const auto& [name, description] : commands) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("--config", flags.config_path, "JSON config file");
    sub->add_option("--seed", flags.seed, "pipeline seed");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--k", flags.k, "number of communities");
    sub->add_option("--folds", flags.folds, "ranking cross-validation folds");
    sub->add_option("--k-loc", flags.k_loc, "location clusters per paper");
    sub->add_option("--lambda", flags.lambda, "MaxEnt L2 strength");
    sub->add_option("--mu", flags.mu, "Dirichlet smoothing");
    sub->add_option("--k1", flags.k1, "BM25 k1");
    sub->add_option("--b", flags.b, "BM25 b");
    sub->add_option("--restarts", flags.restarts, "coordinate-ascent restarts");
    sub->add_option("--min-queries", flags.min_queries, "judged queries needed for a community model");
    sub->add_option("--fraction", flags.fraction, "share of readers stripped of profiles");
    sub->add_option("--mode", flags.mode, "evaluation mode: cv or missing_rpf");
    sub->add_option("--readers", flags.readers, "simulated reader count");
    sub->add_option("--alpha", flags.alpha, "simulated community separation");
    sub->add_option("--noise", flags.noise, "simulated grade noise");
    sub->add_option("--set", flags.sets, "override any config key: dotted.key=value");
    if (name == "recommend") {
      sub->add_option("--paper", flags.paper, "paper id of the query");
      sub->add_option("--quote", flags.quote, "quoted passage");
      sub->add_option("--community", flags.community, "community of the reader");
      sub->add_option("--candidates", flags.candidates, "comma-separated OER ids (default: all)");
      sub->add_option("--top", flags.top, "number of results kept");
    }
  }

  std::string subcommand = "commrec";
  if (!args.empty() && !args.front().starts_with("-") &&
      std::none_of(commands.begin(), commands.end(), [&](const auto& c) { return c.first == args.front(); })) {
    emit_error(err, subcommand, "usage", "unknown subcommand '" + args.front() + "'");
    return 2;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    emit_error(err, subcommand, "usage", e.what());
    return 2;
  }
  subcommand = app.get_subcommands().front()->get_name();

  Context ctx;
  ctx.log = &out;
  try {
    json config = default_config();
    if (!flags.config_path.empty()) {
      const json user = read_json(flags.config_path);
      if (!user.is_object()) throw InvalidArgument("config must be a JSON object");
      for (const auto& [key, value] : user.items()) {
        if (!config.contains(key)) err << "warning: unknown config key '" << key << "'\n";
      }
      config.merge_patch(user);
    }
    ctx.overrides = apply_overrides(config, flags);
    if (config.at("seed").is_null()) throw UsageError("a seed is required (config \"seed\" or --seed)");
    ctx.seed = config.at("seed").get<std::uint64_t>();
    ctx.config = std::move(config);
    ctx.hash = config_hash(ctx.config);
    ctx.out = flags.out;

    if (subcommand == "simulate") {
      stage_simulate(ctx);
    } else if (subcommand == "ingest") {
      stage_ingest(ctx);
    } else if (subcommand == "featurize") {
      stage_featurize(ctx);
    } else if (subcommand == "cluster") {
      stage_cluster(ctx);
    } else if (subcommand == "train-community-classifier") {
      stage_train_classifier(ctx);
    } else if (subcommand == "assign") {
      stage_assign(ctx);
    } else if (subcommand == "graph-build") {
      stage_graph_build(ctx);
    } else if (subcommand == "rankfeat") {
      stage_rankfeat(ctx);
    } else if (subcommand == "train-ranker") {
      stage_train_ranker(ctx);
    } else if (subcommand == "recommend") {
      stage_recommend(ctx, flags);
    } else if (subcommand == "evaluate") {
      stage_evaluate(ctx);
    } else {
      stage_pipeline(ctx);
    }
  } catch (const UsageError& e) {
    ctx.remove_written();
    emit_error(err, subcommand, e.code(), e.what());
    return 2;
  } catch (const Error& e) {
    ctx.remove_written();
    emit_error(err, subcommand, e.code(), e.what());
    return 1;
  } catch (const json::exception& e) {
    ctx.remove_written();
    emit_error(err, subcommand, "config", e.what());
    return 1;
  } catch (const std::exception& e) {
    ctx.remove_written();
    emit_error(err, subcommand, "internal", e.what());
    return 1;
  }
  return 0;
}

}  // namespace commrec::cli
