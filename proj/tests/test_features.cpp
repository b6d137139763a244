#include <catch2/catch_amalgamated.hpp>

#include <citeaudit/features.hpp>
#include <citeaudit/rng.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

using namespace citeaudit;
using citeparse::CitationRecord;
using features::FeatureVector;

namespace {

CitationRecord make_record(std::string title, std::vector<std::string> last_names = {},
                           std::string venue = "", std::optional<int> year = std::nullopt,
                           std::optional<std::string> doi = std::nullopt,
                           std::string raw = "") {
    CitationRecord r;
    r.citation_id = "test";
    r.source_response = "resp";
    r.raw = raw.empty() ? title : raw;
    r.title = std::move(title);
    for (auto& n : last_names) {
        citeparse::Author a;
        a.full = n;
        a.last_name = n;
        r.authors.push_back(std::move(a));
    }
    r.venue = std::move(venue);
    r.year = year;
    r.doi = std::move(doi);
    return r;
}

double val(const FeatureVector& fv, const char* name) {
    return fv.values[features::feature_index(name)];
}

} // namespace

TEST_CASE("feature schema shape", "[features]") {
    const auto& s = features::schema();
    REQUIRE(s.size() == 26);
    CHECK(std::string(features::kSchemaVersion) == "fv26.v1");

    std::set<std::string> names;
    std::map<std::string, int> categories;
    for (const auto& f : s) {
        names.insert(f.name);
        categories[f.category]++;
    }
    CHECK(names.size() == 26);
    CHECK(categories["title"] == 10);
    CHECK(categories["author"] == 4);
    CHECK(categories["year"] == 4);
    CHECK(categories["journal"] == 5);
    CHECK(categories["doi"] == 3);

    SECTION("cross-model consensus never leaks into the schema") {
        for (const auto& f : s) {
            std::string n = f.name;
            CHECK(n.find("cross") == std::string::npos);
            CHECK(n.find("model") == std::string::npos);
            CHECK(n.find("consensus") == std::string::npos);
        }
    }

    SECTION("index lookup") {
        CHECK(features::feature_index("t_word_count") == 0);
        CHECK(features::feature_index("a_count") == 10);
        CHECK(features::feature_index("y_round") == 14);
        CHECK(features::feature_index("j_word_count") == 18);
        CHECK(features::feature_index("d_char_len") == 25);
        CHECK_THROWS_AS(features::feature_index("t_sentiment"), std::invalid_argument);
    }
}

TEST_CASE("title features", "[features]") {
    SECTION("plain title") {
        auto fv = features::extract_features(make_record("Attention is all you need"));
        CHECK(val(fv, "t_word_count") == 5);
        CHECK(val(fv, "t_char_count") == 25);
        CHECK(val(fv, "t_has_colon") == 0);
        CHECK(val(fv, "t_has_question") == 0);
        CHECK(val(fv, "t_has_digit") == 0);
        CHECK(val(fv, "t_has_acronym") == 0);
        CHECK(val(fv, "t_cap_ratio") == 0.2);
        CHECK(val(fv, "t_leading_article") == 0);
        CHECK(val(fv, "t_template_pattern") == 0);
        CHECK(val(fv, "t_toward_prefix") == 0);
    }

    SECTION("toward-a-survey example") {
        auto fv = features::extract_features(make_record("Toward a Survey of X?"));
        CHECK(val(fv, "t_toward_prefix") == 1);
        CHECK(val(fv, "t_template_pattern") == 1);
        CHECK(val(fv, "t_has_question") == 1);
    }

    SECTION("acronyms need two consecutive capitals") {
        CHECK(val(features::extract_features(make_record("BERT: Pre-training of Encoders")),
                  "t_has_acronym") == 1);
        CHECK(val(features::extract_features(make_record("Scaling GPT-3 models")),
                  "t_has_acronym") == 1);
        CHECK(val(features::extract_features(make_record("The McDonald effect")),
                  "t_has_acronym") == 0);
    }

    SECTION("colon and digits") {
        auto fv = features::extract_features(make_record("ImageNet: 14 million images"));
        CHECK(val(fv, "t_has_colon") == 1);
        CHECK(val(fv, "t_has_digit") == 1);
        CHECK(val(fv, "t_has_acronym") == 0); // "ImageNet" alternates case
    }

    SECTION("capitalization ratio counts words, not characters") {
        auto fv = features::extract_features(make_record("The Quick brown Fox"));
        CHECK(val(fv, "t_cap_ratio") == 0.75);
        fv = features::extract_features(make_record("3D imaging advances"));
        CHECK(val(fv, "t_cap_ratio") == Catch::Approx(1.0 / 3.0));
        fv = features::extract_features(make_record(""));
        CHECK(val(fv, "t_cap_ratio") == 0.0);
    }

    SECTION("leading articles") {
        CHECK(val(features::extract_features(make_record("The Annotated Transformer")),
                  "t_leading_article") == 1);
        CHECK(val(features::extract_features(make_record("An Analysis of Voting")),
                  "t_leading_article") == 1);
        CHECK(val(features::extract_features(make_record("a study on bees")),
                  "t_leading_article") == 1);
        CHECK(val(features::extract_features(make_record("Analysis of Voting")),
                  "t_leading_article") == 0);
        CHECK(val(features::extract_features(make_record("Theory of Everything")),
                  "t_leading_article") == 0);
    }

    SECTION("template patterns") {
        auto hit = [](const std::string& title) {
            return val(features::extract_features(make_record(title)), "t_template_pattern");
        };
        CHECK(hit("A Survey of Deep Learning Methods") == 1);
        CHECK(hit("A Novel Approach for Edge Computing") == 1);
        CHECK(hit("Role of Gut Microbiota in Metabolic Health") == 1);
        CHECK(hit("Blockchain Technology: A Systematic Review") == 1);
        CHECK(hit("Applications of Transformers in Vision") == 1);
        CHECK(hit("Machine Learning Approaches for Fraud Detection") == 1);
        CHECK(hit("Attention is all you need") == 0);
        CHECK(hit("Deep residual learning") == 0);
    }

    SECTION("toward and towards prefixes, first word only") {
        auto fv = features::extract_features(make_record("Towards Robust Evaluation"));
        CHECK(val(fv, "t_toward_prefix") == 1);
        fv = features::extract_features(make_record("Steps toward a theory"));
        CHECK(val(fv, "t_toward_prefix") == 0);
    }
}

TEST_CASE("author features", "[features]") {
    SECTION("counts and joined length") {
        auto rec = make_record("T", {"Smith", "Jones"});
        auto fv = features::extract_features(rec);
        CHECK(val(fv, "a_count") == 2);
        CHECK(val(fv, "a_char_len") == 12); // "Smith, Jones"
        CHECK(val(fv, "a_has_etal") == 0);
        CHECK(val(fv, "a_initial_diversity") == 2);
    }

    SECTION("initial diversity is over distinct first letters") {
        auto rec = make_record("T", {"Smith", "Sanchez", "Jones"});
        CHECK(val(features::extract_features(rec), "a_initial_diversity") == 2);
        rec = make_record("T", {"smith", "Sanchez"});
        CHECK(val(features::extract_features(rec), "a_initial_diversity") == 1);
        rec = make_record("T", {});
        CHECK(val(features::extract_features(rec), "a_initial_diversity") == 0);
    }

    SECTION("et al. comes from the raw string") {
        auto rec = make_record("T", {"Vaswani"}, "", std::nullopt, std::nullopt,
                               "Vaswani, A., et al. (2017). T.");
        CHECK(val(features::extract_features(rec), "a_has_etal") == 1);
        rec = make_record("T", {"Vaswani"}, "", std::nullopt, std::nullopt,
                          "Vaswani, A. (2017). T.");
        CHECK(val(features::extract_features(rec), "a_has_etal") == 0);
    }
}

TEST_CASE("year features", "[features]") {
    score::ScoringConfig cfg; // reference_year 2025

    SECTION("missing year forces the defined defaults") {
        auto fv = features::extract_features(make_record("T"), cfg);
        CHECK(val(fv, "y_missing") == 1);
        CHECK(val(fv, "y_recency") == 0);
        CHECK(val(fv, "y_round") == 0);
        CHECK(val(fv, "y_future") == 0);
    }

    SECTION("round, future, recency") {
        auto fv = features::extract_features(make_record("T", {}, "", 2020), cfg);
        CHECK(val(fv, "y_round") == 1);
        CHECK(val(fv, "y_future") == 0);
        CHECK(val(fv, "y_missing") == 0);
        CHECK(val(fv, "y_recency") == 5);

        fv = features::extract_features(make_record("T", {}, "", 2017), cfg);
        CHECK(val(fv, "y_round") == 0);
        CHECK(val(fv, "y_recency") == 8);

        fv = features::extract_features(make_record("T", {}, "", 2026), cfg);
        CHECK(val(fv, "y_future") == 1);
        CHECK(val(fv, "y_recency") == -1);

        fv = features::extract_features(make_record("T", {}, "", 2015), cfg);
        CHECK(val(fv, "y_round") == 1);
    }

    SECTION("changing reference_year shifts recency by the delta") {
        rng::Stream st(rng::derive_seed(7, "features-recency"));
        score::ScoringConfig shifted = cfg;
        shifted.reference_year = 2030;
        for (int i = 0; i < 50; ++i) {
            std::optional<int> year;
            if (st.bernoulli(0.8)) year = st.int_between(1900, 2030);
            auto rec = make_record("Some Title", {"Lee"}, "Nature", year);
            auto a = features::extract_features(rec, cfg);
            auto b = features::extract_features(rec, shifted);
            if (year) {
                CHECK(val(b, "y_recency") - val(a, "y_recency") == 5);
            } else {
                CHECK(val(a, "y_recency") == 0);
                CHECK(val(b, "y_recency") == 0);
            }
        }
    }
}

TEST_CASE("journal features", "[features]") {
    SECTION("generic names match by canonical key") {
        auto fv = features::extract_features(
            make_record("T", {}, "International Journal of Advanced Research"));
        CHECK(val(fv, "j_generic_name") == 1);
        CHECK(val(fv, "j_has_international") == 1);
        CHECK(val(fv, "j_word_count") == 5);
        CHECK(val(fv, "j_empty") == 0);

        fv = features::extract_features(make_record("T", {}, "journal of medicine"));
        CHECK(val(fv, "j_generic_name") == 1);

        fv = features::extract_features(make_record("T", {}, "Nature"));
        CHECK(val(fv, "j_generic_name") == 0);
        CHECK(val(fv, "j_has_international") == 0);
        CHECK(val(fv, "j_char_count") == 6);
    }

    SECTION("empty venue") {
        auto fv = features::extract_features(make_record("T"));
        CHECK(val(fv, "j_empty") == 1);
        CHECK(val(fv, "j_word_count") == 0);
        CHECK(val(fv, "j_char_count") == 0);
        CHECK(val(fv, "j_generic_name") == 0);
    }

    SECTION("international flag is substring, case-insensitive") {
        auto fv = features::extract_features(
            make_record("T", {}, "Proceedings of the INTERNATIONAL Conference on Robotics"));
        CHECK(val(fv, "j_has_international") == 1);
    }
}

TEST_CASE("doi features", "[features]") {
    auto fv = features::extract_features(
        make_record("T", {}, "", std::nullopt, std::string("10.1038/nature14539")));
    CHECK(val(fv, "d_present") == 1);
    CHECK(val(fv, "d_format_valid") == 1);
    CHECK(val(fv, "d_char_len") == 19);

    fv = features::extract_features(make_record("T"));
    CHECK(val(fv, "d_present") == 0);
    CHECK(val(fv, "d_format_valid") == 0);
    CHECK(val(fv, "d_char_len") == 0);

    fv = features::extract_features(make_record("T", {}, "", std::nullopt, std::string("10.x/abc")));
    CHECK(val(fv, "d_present") == 1);
    CHECK(val(fv, "d_format_valid") == 0);
    CHECK(val(fv, "d_char_len") == 8);

    fv = features::extract_features(
        make_record("T", {}, "", std::nullopt, std::string("10.48550/arXiv.1706.03762")));
    CHECK(val(fv, "d_format_valid") == 1);
}

TEST_CASE("feature extraction is total and deterministic", "[features]") {
    rng::Stream st(rng::derive_seed(7, "features-fuzz"));
    std::vector<std::string> words = {"deep",   "Graph",  "NEURAL", "causé", "il",
                                      "Toward", "Survey", "of",     "2020",       "X?"};
    std::vector<std::string> venues = {"", "Nature", "Journal of Science",
                                       "International Conference on Learning"};

    for (int trial = 0; trial < 400; ++trial) {
        std::string title;
        int tw = st.int_between(0, 8);
        for (int i = 0; i < tw; ++i) {
            if (!title.empty()) title += ' ';
            title += words[st.index_below(words.size())];
        }
        std::vector<std::string> authors;
        int na = st.int_between(0, 5);
        for (int i = 0; i < na; ++i) authors.push_back(words[st.index_below(words.size())]);
        std::optional<int> year;
        if (st.bernoulli(0.7)) year = st.int_between(1800, 2100);
        std::optional<std::string> doi;
        if (st.bernoulli(0.3)) doi = "10.1234/x" + std::to_string(st.int_between(0, 999));

        auto rec = make_record(title, authors, venues[st.index_below(venues.size())], year, doi);
        auto fv = features::extract_features(rec);

        for (size_t i = 0; i < features::kFeatureCount; ++i) {
            CAPTURE(i, title);
            CHECK(std::isfinite(fv.values[i]));
        }
        for (const char* flag : {"t_has_colon", "t_has_question", "t_has_digit", "t_has_acronym",
                                 "t_leading_article", "t_template_pattern", "t_toward_prefix",
                                 "a_has_etal", "y_round", "y_future", "y_missing",
                                 "j_generic_name", "j_has_international", "j_empty", "d_present",
                                 "d_format_valid"}) {
            double b = val(fv, flag);
            CHECK((b == 0.0 || b == 1.0));
        }
        for (const char* count :
             {"t_word_count", "t_char_count", "a_count", "a_char_len", "a_initial_diversity",
              "j_word_count", "j_char_count", "d_char_len"}) {
            CHECK(val(fv, count) >= 0.0);
        }
        CHECK(val(fv, "t_cap_ratio") >= 0.0);
        CHECK(val(fv, "t_cap_ratio") <= 1.0);

        auto again = features::extract_features(rec);
        CHECK(again.values == fv.values);
    }
}

TEST_CASE("cross-model count", "[features]") {
    using citeparse::CanonicalKey;
    auto key = [](const std::string& s) { return citeparse::canonical_title_key(s); };

    std::map<std::string, std::set<CanonicalKey>> corpus;
    corpus["model-a"] = {key("Attention is all you need"), key("Deep learning")};
    corpus["model-b"] = {key("Attention Is All You Need!")};
    corpus["model-c"] = {key("Something else")};
    corpus["model-d"] = {};

    CHECK(features::cross_model_count(key("attention is all you need"), corpus) == 2);
    CHECK(features::cross_model_count(key("Deep Learning"), corpus) == 1);
    CHECK(features::cross_model_count(key("never seen"), corpus) == 0);
    CHECK_THROWS_AS(features::cross_model_count(key("x"), {}), std::invalid_argument);

    SECTION("matches a brute-force membership count on random corpora") {
        rng::Stream st(rng::derive_seed(7, "features-xmodel"));
        for (int trial = 0; trial < 50; ++trial) {
            std::map<std::string, std::set<CanonicalKey>> c;
            std::map<std::string, int> expected;
            int models = st.int_between(1, 6);
            for (int m = 0; m < models; ++m) {
                std::string id = "m" + std::to_string(m);
                int papers = st.int_between(0, 12);
                for (int p = 0; p < papers; ++p) {
                    std::string t = "paper " + std::to_string(st.int_between(0, 9));
                    if (c[id].insert(key(t)).second) expected[key(t).key]++;
                }
                c[id]; // ensure the model exists even with zero papers
            }
            for (int probe = 0; probe < 10; ++probe) {
                std::string t = "paper " + std::to_string(st.int_between(0, 9));
                int want = expected.count(key(t).key) ? expected[key(t).key] : 0;
                CHECK(features::cross_model_count(key(t), c) == want);
            }
        }
    }
}

TEST_CASE("feature csv round trip", "[features]") {
    std::vector<FeatureVector> rows;
    rng::Stream st(rng::derive_seed(7, "features-csv"));
    for (int i = 0; i < 20; ++i) {
        FeatureVector fv;
        fv.citation_id = "c" + std::to_string(i);
        for (auto& v : fv.values) v = st.bernoulli(0.5) ? st.int_between(0, 40) : st.unit();
        fv.label = st.bernoulli(0.5) ? features::Label::real : features::Label::hallucinated;
        rows.push_back(fv);
    }
    std::vector<std::string> models;
    for (int i = 0; i < 20; ++i) models.push_back("model-" + std::to_string(i % 3));

    std::ostringstream out;
    features::write_features_csv(out, rows, &models);
    std::string text = out.str();

    SECTION("header is exactly the schema order") {
        std::string header = text.substr(0, text.find('\n'));
        std::string want = "citation_id,model_id";
        for (const auto& f : features::schema()) want += std::string(",") + f.name;
        want += ",label";
        CHECK(header == want);
    }

    SECTION("values survive bit-for-bit") {
        std::istringstream in(text);
        auto table = features::read_features_csv(in, "mem");
        REQUIRE(table.rows.size() == rows.size());
        REQUIRE(table.model_ids == models);
        CHECK(table.has_labels);
        for (size_t i = 0; i < rows.size(); ++i) {
            CHECK(table.rows[i].citation_id == rows[i].citation_id);
            CHECK(table.rows[i].values == rows[i].values);
            CHECK(table.rows[i].label == rows[i].label);
        }
    }

    SECTION("label column dropped when any row is unlabeled") {
        auto partial = rows;
        partial[3].label.reset();
        std::ostringstream o2;
        features::write_features_csv(o2, partial);
        std::string header = o2.str().substr(0, o2.str().find('\n'));
        CHECK(header.find(",label") == std::string::npos);
        CHECK(header.find(",model_id") == std::string::npos);
        std::istringstream in(o2.str());
        auto table = features::read_features_csv(in, "mem");
        CHECK_FALSE(table.has_labels);
        CHECK(table.model_ids.empty());
        CHECK(table.rows.size() == rows.size());
    }

    SECTION("reader rejects malformed input") {
        std::istringstream empty("");
        CHECK_THROWS_AS(features::read_features_csv(empty, "mem"), std::runtime_error);

        std::istringstream bad_header("citation_id,nope\n");
        CHECK_THROWS_AS(features::read_features_csv(bad_header, "mem"), std::runtime_error);

        std::string good_header = text.substr(0, text.find('\n') + 1);
        std::istringstream bad_number(good_header + "c1,m1,xx" + std::string(25, ',') + ",real\n");
        CHECK_THROWS_AS(features::read_features_csv(bad_number, "mem"), std::runtime_error);
    }
}

TEST_CASE("feature data files mirror the compiled defaults", "[features]") {
    const auto& lex = features::default_feature_lexicon();

    std::ifstream tf(std::string(CITEAUDIT_DATA_DIR) + "/title_templates.txt");
    REQUIRE(tf.good());
    auto templates = features::load_line_list(tf, "title_templates.txt");
    CHECK(templates.version == lex.templates_version);
    CHECK(templates.entries == lex.title_template_patterns);

    std::ifstream gf(std::string(CITEAUDIT_DATA_DIR) + "/generic_journals.txt");
    REQUIRE(gf.good());
    auto generics = features::load_line_list(gf, "generic_journals.txt");
    CHECK(generics.version == lex.generic_version);
    CHECK(generics.entries == lex.generic_journals);

    SECTION("a lexicon rebuilt from the files behaves identically") {
        auto rebuilt = features::build_feature_lexicon(templates.entries, generics.entries,
                                                       templates.version, generics.version);
        auto rec = make_record("A Survey of Things", {}, "Journal of Science", 2020);
        auto a = features::extract_features(rec, {}, rebuilt);
        auto b = features::extract_features(rec);
        CHECK(a.values == b.values);
    }

    SECTION("line list loader rejects files without a version header") {
        std::istringstream no_version("entry one\nentry two\n");
        CHECK_THROWS_AS(features::load_line_list(no_version, "mem"), std::runtime_error);
    }
}
