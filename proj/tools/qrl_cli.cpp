// qrl: build indexes, train reformulators, evaluate, and inspect.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or input error,
// 3 refusal to overwrite an existing output.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qrl/qrl.hpp"

namespace fs = std::filesystem;

namespace {

enum exit_code : int { exit_ok = 0, exit_runtime = 1, exit_usage = 2, exit_refused = 3 };

struct usage_error : qrl::error {
    using error::error;
};
struct refused : qrl::error {
    using error::error;
};

/// QRL_LOG: 0 quiet, 1 progress (default), 2 debug.
int log_level() {
    static const int level = [] {
        const char* v = std::getenv("QRL_LOG");
        if (!v || !*v) return 1;
        std::string s(v);
        if (s == "quiet") return 0;
        if (s == "info") return 1;
        if (s == "debug") return 2;
        try {
            return std::stoi(s);
        } catch (const std::exception&) {
            return 1;
        }
    }();
    return level;
}

void info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << msg << '\n';
}
void debug(const std::string& msg) {
    if (log_level() >= 2) std::cerr << msg << '\n';
}

void guard_output(const std::string& path, bool force) {
    if (!path.empty() && fs::exists(path) && !force) {
        throw refused("refusing to overwrite " + path + " (pass --force)");
    }
}

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw usage_error(what + " path not given");
    if (!fs::exists(path)) throw qrl::not_found("no such file: " + path);
}

std::vector<std::size_t> parse_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            auto v = std::stoul(item, &pos);
            if (pos != item.size() || v == 0) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw usage_error("bad list element '" + item + "' in '" + s + "'");
        }
    }
    if (out.empty()) throw usage_error("empty list");
    return out;
}

/// Options shared by the data-consuming commands.
struct Common {
    std::string config;
    std::string corpus;
    std::string embeddings;
    std::string index;
    std::string dataset;
    std::optional<std::uint64_t> seed;

    void add_to(CLI::App* app, bool with_dataset = true) {
        app->add_option("--config", config, "JSON configuration");
        app->add_option("--corpus", corpus, "JSON-lines corpus (overrides the config)");
        app->add_option("--embeddings", embeddings, "word vectors (overrides the config)");
        app->add_option("--index", index, "index file");
        if (with_dataset) app->add_option("--dataset", dataset, "JSON-lines queries with relevance judgements");
        app->add_option("--seed", seed, "random seed (overrides the config)");
    }

    qrl::LabConfig lab() const {
        auto c = config.empty() ? qrl::LabConfig{} : qrl::load_config(config);
        if (!corpus.empty()) c.corpus = corpus;
        if (!embeddings.empty()) c.embeddings = embeddings;
        if (seed) c.seed = *seed;
        return c;
    }
};

/// Loaded inputs; embeddings only when some method needs them.
struct Data {
    qrl::LabConfig cfg;
    qrl::Corpus corpus;
    qrl::DatasetSplit split;
    std::optional<qrl::InvertedIndex> index;
    std::optional<qrl::EmbeddingTable> table;
};

Data load_data(const Common& c, bool need_dataset, bool need_embeddings, bool need_corpus = true) {
    Data d;
    d.cfg = c.lab();
    require_file(c.index, "--index");
    if (need_corpus || need_dataset) require_file(d.cfg.corpus, "corpus");
    if (need_dataset) require_file(c.dataset, "--dataset");
    if (need_embeddings) require_file(d.cfg.embeddings, "embeddings");
    if (need_corpus || need_dataset) d.corpus = qrl::load_corpus(d.cfg.corpus);
    if (need_dataset) d.split = qrl::load_dataset(c.dataset, d.corpus);
    d.index = qrl::InvertedIndex::load(c.index);
    if (need_embeddings) d.table = qrl::load_embeddings(d.cfg.embeddings, d.cfg.seed);
    debug("loaded index with " + std::to_string(d.index->n_docs()) + " documents");
    return d;
}

std::unique_ptr<qrl::PolicyModel> load_model(const std::string& path, const qrl::EmbeddingTable& table) {
    auto cfg = qrl::PolicyModel::read_config(path);
    if (cfg.embedding_dim != table.dimension()) {
        throw qrl::format_error(path + ": checkpoint expects " + std::to_string(cfg.embedding_dim) +
                                "-dimensional embeddings, table has " + std::to_string(table.dimension()));
    }
    auto model = std::make_unique<qrl::PolicyModel>(cfg, table, 0);
    model->load(path);
    return model;
}

struct MethodName {
    bool supervised = false;
    qrl::ModelKind kind = qrl::ModelKind::cnn;
};

std::optional<MethodName> parse_learned(const std::string& name) {
    static const std::map<std::string, MethodName> names = {
        {"sl-ff", {true, qrl::ModelKind::ff}},      {"sl-cnn", {true, qrl::ModelKind::cnn}},
        {"rl-ff", {false, qrl::ModelKind::ff}},     {"rl-cnn", {false, qrl::ModelKind::cnn}},
        {"rl-rnn", {false, qrl::ModelKind::rnn}},   {"rl-rnn-seq", {false, qrl::ModelKind::rnn_seq}},
    };
    auto it = names.find(name);
    if (it == names.end()) return std::nullopt;
    return it->second;
}

/// Term chooser settings for a learned method: SL models threshold at the
/// classifier threshold, RL models at epsilon.
qrl::RlConfig chooser_config(const qrl::LabConfig& cfg, const MethodName& m) {
    auto rc = cfg.rl;
    if (m.supervised) rc.epsilon = cfg.sl.classifier.threshold;
    return rc;
}

// ---------------------------------------------------------------- generate

int cmd_generate(const std::string& out_dir, const qrl::SyntheticConfig& sc, bool force) {
    fs::path dir(out_dir);
    auto corpus = (dir / "corpus.jsonl").string();
    auto queries = (dir / "queries.jsonl").string();
    auto vectors = (dir / "embeddings.txt").string();
    auto config = (dir / "config.json").string();
    for (const auto& p : {corpus, queries, vectors, config}) guard_output(p, force);
    auto data = qrl::generate_synthetic(sc);
    fs::create_directories(dir);
    qrl::write_corpus(data.corpus, corpus);
    qrl::write_dataset(data.split, queries);
    data.embeddings.write(vectors);
    qrl::LabConfig lab;
    lab.corpus = "corpus.jsonl";
    lab.embeddings = "embeddings.txt";
    lab.seed = sc.seed;
    std::ofstream(config) << qrl::to_json(lab).dump(2) << '\n';
    std::cout << "documents\t" << data.corpus.size() << "\nqueries\t" << data.split.size() << "\ntrain\t"
              << data.split.train.size() << "\nvalid\t" << data.split.valid.size() << "\ntest\t"
              << data.split.test.size() << "\nembeddings\t" << data.embeddings.size() << '\n';
    return exit_ok;
}

// ---------------------------------------------------------------- converters

void write_mapping(const std::vector<std::pair<std::string, qrl::doc_id>>& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw qrl::error("cannot write " + path);
    for (const auto& [name, id] : m) out << name << '\t' << id << '\n';
}

std::vector<std::pair<std::string, qrl::doc_id>> read_mapping(const std::string& path) {
    auto in = qrl::detail::open_input(path);
    std::vector<std::pair<std::string, qrl::doc_id>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (qrl::detail::blank(line)) continue;
        auto tab = line.rfind('\t');
        try {
            if (tab == std::string::npos) throw std::invalid_argument("no tab");
            out.emplace_back(line.substr(0, tab), static_cast<qrl::doc_id>(std::stoull(line.substr(tab + 1))));
        } catch (const std::exception&) {
            throw qrl::format_error(qrl::detail::where(path, lineno) + "expected '<name>\\t<id>'");
        }
    }
    return out;
}

// ---------------------------------------------------------------- index

int cmd_index(const Common& c, const std::string& out, bool force) {
    auto cfg = c.lab();
    auto path = out.empty() ? c.index : out;
    if (path.empty()) throw usage_error("give the index path with --index or --out");
    require_file(cfg.corpus, "corpus");
    guard_output(path, force);
    auto corpus = qrl::load_corpus(cfg.corpus);
    auto index = qrl::build_index(corpus);
    index.save(path);
    std::cout << "documents\t" << index.n_docs() << "\nterms\t" << index.n_terms() << "\ntokens\t"
              << index.collection_length() << '\n';
    return exit_ok;
}

// ---------------------------------------------------------------- train

int cmd_train(const Common& c, const std::string& model_name, const std::string& out, const std::string& labels,
              bool force, bool dry_run) {
    auto method = parse_learned(model_name);
    if (!method) throw usage_error("unknown model '" + model_name + "'");
    if (out.empty()) throw usage_error("give the checkpoint path with --out");
    auto cfg = c.lab();
    auto log_path = out + ".log.jsonl";
    if (dry_run) {
        require_file(c.index, "--index");
        require_file(c.dataset, "--dataset");
        require_file(cfg.corpus, "corpus");
        require_file(cfg.embeddings, "embeddings");
        if (!labels.empty()) require_file(labels, "--labels");
        cfg.model_config(method->kind, 1).validate();
        guard_output(out, force);
        guard_output(log_path, force);
        std::cout << "configuration ok\n" << qrl::to_json(cfg).dump(2) << '\n';
        return exit_ok;
    }
    guard_output(out, force);
    guard_output(log_path, force);
    auto d = load_data(c, true, true);
    auto mc = d.cfg.model_config(method->kind, d.table->dimension());
    qrl::PolicyModel model(mc, *d.table, d.cfg.seed);
    std::ofstream log(log_path);
    if (!log) throw qrl::error("cannot write " + log_path);
    auto t0 = std::chrono::steady_clock::now();
    if (method->supervised) {
        std::map<qrl::query_id, std::vector<qrl::TermLabel>> cache;
        if (!labels.empty()) cache = qrl::read_labels(labels);
        auto data = qrl::label_queries(d.split.train, *d.index, d.cfg.rl.pool, d.cfg.rl.reward, d.cfg.sl.label_threshold,
                                       labels.empty() ? nullptr : &cache);
        info("labeled " + std::to_string(data.size()) + " training pools; positive fraction " +
             std::to_string(qrl::positive_fraction(data)));
        auto cc = d.cfg.sl.classifier;
        cc.seed = d.cfg.seed;
        auto res = qrl::train_classifier(model, data, cc);
        nlohmann::json rec = {{"steps", res.steps},
                              {"initial_loss", res.initial_loss},
                              {"final_loss", res.final_loss},
                              {"train_accuracy", res.accuracy},
                              {"positive_fraction", qrl::positive_fraction(data)}};
        log << rec.dump() << '\n';
        std::cout << rec.dump() << '\n';
    } else {
        auto res = qrl::train_policy(model, *d.index, d.split.train, d.split.valid, d.cfg.rl, d.cfg.train,
                                     d.cfg.seed ^ 0x5eedull, [&](const qrl::TrainLogRecord& r) {
                                         log << r.to_json().dump() << '\n';
                                         info("epoch " + std::to_string(r.epoch) + " step " + std::to_string(r.step) +
                                              " train " + std::to_string(r.train_reward) + " valid " +
                                              std::to_string(r.valid_reward));
                                     });
        std::cout << "best_valid\t" << res.best_valid << "\nbest_step\t" << res.best_step << "\nsteps\t" << res.steps
                  << "\nearly_stopped\t" << (res.early_stopped ? 1 : 0) << '\n';
    }
    model.save(out);
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    info("wrote " + out + " in " + std::to_string(secs) + " s");
    return exit_ok;
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
    std::vector<std::string> methods;
    std::vector<std::string> checkpoints;  // NAME=PATH
    std::string split = "test";
    std::size_t k = 0;
    std::size_t rounds = 0;
    std::string sweep;
    std::string out;
    std::string oracle_model = "cnn";
    bool force = false;
};

int cmd_eval(const Common& c, const EvalOptions& o) {
    if (o.methods.empty()) throw usage_error("name at least one method");
    std::map<std::string, std::string> ckpt;
    for (const auto& s : o.checkpoints) {
        auto eq = s.find('=');
        if (eq == std::string::npos) throw usage_error("--checkpoint expects NAME=PATH, got '" + s + "'");
        ckpt[s.substr(0, eq)] = s.substr(eq + 1);
    }
    bool need_table = false;
    for (const auto& m : o.methods) {
        if (qrl::is_baseline(m)) {
            need_table = need_table || qrl::needs_embeddings(qrl::parse_baseline(m));
        } else if (parse_learned(m)) {
            if (!ckpt.count(m)) throw usage_error("method " + m + " needs --checkpoint " + m + "=PATH");
            require_file(ckpt[m], "checkpoint");
            need_table = true;
        } else if (m == "rl-oracle") {
            need_table = true;
        } else if (m != "sl-oracle") {
            throw usage_error("unknown method '" + m + "'");
        }
    }
    std::vector<std::size_t> sweep;
    if (!o.sweep.empty()) {
        sweep = parse_list(o.sweep);
        for (const auto& m : o.methods) {
            if (!parse_learned(m)) throw usage_error("--sweep-candidates applies to learned methods, not " + m);
        }
    }
    guard_output(o.out, o.force);
    auto d = load_data(c, true, need_table);
    if (o.k) d.cfg.eval_k = o.k;
    const auto rounds = o.rounds ? o.rounds : d.cfg.rl.rounds;
    const auto& queries = d.split.split(o.split);
    if (queries.empty()) throw usage_error("split '" + o.split + "' has no queries");
    const auto metrics = d.cfg.metrics();
    const qrl::EmbeddingTable* table = d.table ? &*d.table : nullptr;

    std::ofstream file;
    if (!o.out.empty()) {
        file.open(o.out);
        if (!file) throw qrl::error("cannot write " + o.out);
    }
    std::ostream& data_out = o.out.empty() ? std::cout : file;

    if (!sweep.empty()) {
        qrl::MetricSpec r{qrl::MetricKind::recall, d.cfg.eval_k};
        data_out << "method\tM\t" << r.name() << "\tselected\n";
        for (const auto& m : o.methods) {
            auto method = *parse_learned(m);
            auto model_ptr = load_model(ckpt[m], *d.table);
            auto& model = *model_ptr;
            for (const auto& p : qrl::sweep_candidates(model, queries, *d.index, chooser_config(d.cfg, method), sweep,
                                                       r, rounds)) {
                data_out << m << '\t' << p.m << '\t' << p.value << '\t' << p.mean_selected << '\n';
            }
        }
        return exit_ok;
    }

    std::vector<std::pair<std::string, qrl::EvalReport>> rows;
    for (const auto& m : o.methods) {
        info("evaluating " + m + " on " + std::to_string(queries.size()) + " " + o.split + " queries");
        if (qrl::is_baseline(m)) {
            rows.emplace_back(m, qrl::evaluate_baseline(qrl::parse_baseline(m), queries, *d.index, table, d.cfg.prf,
                                                        metrics));
        } else if (m == "sl-oracle") {
            rows.emplace_back(m, qrl::sl_oracle_eval(queries, *d.index, d.cfg.rl.pool, d.cfg.rl.reward, metrics,
                                                     d.cfg.sl.label_threshold));
        } else if (m == "rl-oracle") {
            auto kind = qrl::parse_model_kind(o.oracle_model);
            auto oc = d.cfg.oracle;
            oc.seed = d.cfg.seed;
            oc.subset_size = std::min(oc.subset_size, queries.size());
            auto res = qrl::rl_oracle(queries, *d.index, *d.table, d.cfg.model_config(kind, d.table->dimension()),
                                      d.cfg.rl, oc, metrics);
            qrl::write_oracle_tsv(std::cerr, res);
            rows.emplace_back(m, res.report);
        } else {
            auto method = *parse_learned(m);
            auto model_ptr = load_model(ckpt[m], *d.table);
            auto& model = *model_ptr;
            rows.emplace_back(m, qrl::evaluate_policy(model, queries, *d.index, chooser_config(d.cfg, method),
                                                      metrics, rounds)
                                     .report);
        }
    }

    std::cout << std::left << std::setw(12) << "method";
    for (const auto& s : metrics) std::cout << '\t' << s.name();
    std::cout << '\n' << std::fixed << std::setprecision(4);
    for (const auto& [name, report] : rows) {
        std::cout << std::left << std::setw(12) << name;
        for (std::size_t i = 0; i < metrics.size(); ++i) std::cout << '\t' << report.mean(i);
        std::cout << '\n';
    }
    if (!o.out.empty()) {
        file << "method\tqid";
        for (const auto& s : metrics) file << '\t' << s.name();
        file << '\n' << std::setprecision(6) << std::fixed;
        for (const auto& [name, report] : rows) {
            for (std::size_t q = 0; q < report.size(); ++q) {
                file << name << '\t' << report.qids()[q];
                for (double v : report.row(q)) file << '\t' << v;
                file << '\n';
            }
        }
    }
    return exit_ok;
}

// ---------------------------------------------------------------- reformulate

int cmd_reformulate(const Common& c, const std::vector<std::string>& queries, const std::string& checkpoint,
                    std::size_t k, std::size_t rounds_opt, const std::string& probs, bool force) {
    if (queries.empty()) throw usage_error("give at least one query");
    if (checkpoint.empty()) throw usage_error("--checkpoint is required");
    require_file(checkpoint, "checkpoint");
    guard_output(probs, force);
    auto d = load_data(c, false, true);
    auto model_ptr = load_model(checkpoint, *d.table);
    auto& model = *model_ptr;
    auto rounds = rounds_opt ? rounds_opt : d.cfg.rl.rounds;
    std::ofstream pfile;
    if (!probs.empty()) {
        if (model.is_sequential()) throw usage_error("--probs needs a term-selection model");
        pfile.open(probs);
        if (!pfile) throw qrl::error("cannot write " + probs);
        qrl::write_probability_header(pfile);
    }
    auto show = [&](const qrl::SearchResult& r) {
        for (std::size_t i = 0; i < r.size() && i < k; ++i) {
            const auto& doc = d.corpus.at(r[i].id);
            std::cout << "    " << i + 1 << ". [" << r[i].id << "] "
                      << (doc.title.empty() ? qrl::join(doc.body) : qrl::join(doc.title)) << '\n';
        }
    };
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        auto q0 = qrl::tokenize(queries[qi]);
        if (q0.empty()) throw usage_error("query '" + queries[qi] + "' has no tokens");
        std::cout << "query\t" << qrl::join(q0) << '\n' << "  original top-" << k << ":\n";
        show(d.index->search(q0, k));
        auto r = qrl::reformulate_rounds(q0, *d.index, model, d.cfg.rl, rounds, k);
        for (std::size_t i = 0; i < r.per_round.size(); ++i) {
            std::cout << "  round " << i + 1 << "\t" << qrl::join(r.per_round[i]) << '\n';
        }
        std::cout << "  reformulated top-" << k << ":\n";
        show(r.results);
        if (pfile.is_open()) {
            auto pool = qrl::test_pool(q0, *d.index, d.cfg.rl.pool);
            qrl::write_probabilities(pfile, qi, pool, model.term_probabilities(q0, pool));
        }
    }
    return exit_ok;
}

// ---------------------------------------------------------------- label

int cmd_label(const Common& c, const std::string& split, const std::string& out, bool force) {
    if (out.empty()) throw usage_error("give the label file with --out");
    guard_output(out, force);
    auto d = load_data(c, true, false);
    auto data = qrl::label_queries(d.split.split(split), *d.index, d.cfg.rl.pool, d.cfg.rl.reward,
                                   d.cfg.sl.label_threshold);
    std::ofstream f(out);
    if (!f) throw qrl::error("cannot write " + out);
    qrl::write_labels_header(f);
    for (const auto& p : data) qrl::write_labels(f, p.labels);
    std::cout << "pools\t" << data.size() << "\npositive_fraction\t" << qrl::positive_fraction(data) << '\n';
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"query reformulation lab"};
    app.require_subcommand(1);

    Common common;
    std::string out, labels, in_path, mapping, topics, qrels, split = "train", probs, checkpoint;
    std::string model_name;
    bool force = false, dry_run = false, append = false;
    std::size_t k = 3, rounds = 0;
    qrl::query_id first_qid = 0;
    qrl::SyntheticConfig sc;
    EvalOptions eo;

    auto* gen = app.add_subcommand("generate", "write a synthetic corpus, queries, vectors and config");
    gen->add_option("--out", out, "output directory")->required();
    gen->add_option("--seed", sc.seed, "generator seed");
    gen->add_option("--topics", sc.n_topics, "number of topics");
    gen->add_option("--docs", sc.n_docs, "number of documents");
    gen->add_option("--queries", sc.n_queries, "number of queries");
    gen->add_option("--mismatch", sc.mismatch, "query/document vocabulary mismatch in [0, 1]");
    gen->add_flag("--force", force, "overwrite existing files");

    auto* cc = app.add_subcommand("convert-corpus", "paragraph TSV to the JSON-lines corpus");
    cc->add_option("--in", in_path, "'<id>\\t<text>' or '<id>\\t<title>\\t<text>' lines")->required();
    cc->add_option("--out", out, "corpus output")->required();
    cc->add_option("--mapping", mapping, "string id to integer id TSV output")->required();
    cc->add_flag("--force", force, "overwrite existing files");

    auto* cq = app.add_subcommand("convert-queries", "topics plus TREC qrels to the JSON-lines query file");
    cq->add_option("--topics", topics, "'<qid>\\t<query>' lines")->required();
    cq->add_option("--qrels", qrels, "TREC qrels")->required();
    cq->add_option("--mapping", mapping, "mapping written by convert-corpus")->required();
    cq->add_option("--split", split, "train, valid or test")->check(CLI::IsMember({"train", "valid", "test"}));
    cq->add_option("--first-qid", first_qid, "id of the first topic");
    cq->add_option("--out", out, "query file")->required();
    cq->add_flag("--append", append, "append to an existing query file");
    cq->add_flag("--force", force, "overwrite existing files");

    auto* idx = app.add_subcommand("index", "build and save the BM25 index");
    common.add_to(idx, false);
    idx->add_option("--out", out, "index output (defaults to --index)");
    idx->add_flag("--force", force, "overwrite an existing index");

    auto* train = app.add_subcommand("train", "train sl-ff|sl-cnn|rl-ff|rl-cnn|rl-rnn|rl-rnn-seq");
    common.add_to(train);
    train->add_option("--model", model_name, "model name")->required();
    train->add_option("--out", out, "checkpoint output; the log goes to <out>.log.jsonl")->required();
    train->add_option("--labels", labels, "label cache for SL models");
    train->add_flag("--force", force, "overwrite existing outputs");
    train->add_flag("--dry-run", dry_run, "validate inputs and configuration only");

    auto* ev = app.add_subcommand("eval", "evaluate methods on one split");
    common.add_to(ev);
    ev->add_option("methods", eo.methods,
                   "raw prf-tfidf prf-rm prf-emb vocab-emb sl-ff sl-cnn rl-ff rl-cnn rl-rnn rl-rnn-seq sl-oracle "
                   "rl-oracle")
        ->required();
    ev->add_option("--checkpoint", eo.checkpoints, "NAME=PATH for each learned method");
    ev->add_option("--split", eo.split, "train, valid or test")->check(CLI::IsMember({"train", "valid", "test"}));
    ev->add_option("--k", eo.k, "K of R@K and MAP@K");
    ev->add_option("--rounds", eo.rounds, "reformulation rounds for learned methods");
    ev->add_option("--sweep-candidates", eo.sweep, "comma-separated M values; prints a recall curve");
    ev->add_option("--oracle-model", eo.oracle_model, "model kind trained by rl-oracle");
    ev->add_option("--out", eo.out, "per-query TSV, or the sweep TSV");
    ev->add_flag("--force", eo.force, "overwrite an existing output");

    std::vector<std::string> query_strings;
    auto* ref = app.add_subcommand("reformulate", "show reformulations of ad-hoc queries");
    common.add_to(ref, false);
    ref->add_option("queries", query_strings, "query strings")->required();
    ref->add_option("--checkpoint", checkpoint, "trained model")->required();
    ref->add_option("--k", k, "documents shown per ranking");
    ref->add_option("--rounds", rounds, "reformulation rounds");
    ref->add_option("--probs", probs, "per-term probability TSV output");
    ref->add_flag("--force", force, "overwrite an existing output");

    auto* lab = app.add_subcommand("label", "write SL term labels for one split");
    common.add_to(lab);
    lab->add_option("--split", split, "train, valid or test")->check(CLI::IsMember({"train", "valid", "test"}));
    lab->add_option("--out", out, "label TSV")->required();
    lab->add_flag("--force", force, "overwrite an existing output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_usage;
    }

    try {
        if (gen->parsed()) return cmd_generate(out, sc, force);
        if (cc->parsed()) {
            guard_output(out, force);
            guard_output(mapping, force);
            auto m = qrl::convert_paragraphs(in_path, out);
            write_mapping(m, mapping);
            std::cout << "documents\t" << m.size() << '\n';
            return exit_ok;
        }
        if (cq->parsed()) {
            if (!append) guard_output(out, force);
            auto n = qrl::convert_queries(topics, qrels, read_mapping(mapping), split, out, first_qid, append);
            std::cout << "queries\t" << n << '\n';
            return exit_ok;
        }
        if (idx->parsed()) return cmd_index(common, out, force);
        if (train->parsed()) return cmd_train(common, model_name, out, labels, force, dry_run);
        if (ev->parsed()) return cmd_eval(common, eo);
        if (ref->parsed()) return cmd_reformulate(common, query_strings, checkpoint, k, rounds, probs, force);
        if (lab->parsed()) return cmd_label(common, split, out, force);
    } catch (const refused& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_refused;
    } catch (const usage_error& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return exit_usage;
    } catch (const qrl::not_found& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const qrl::format_error& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return exit_usage;
    } catch (const qrl::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_runtime;
    }
    return exit_usage;
}
