#pragma once

// Prompt-kit generation: three elicitation conditions rendered from fixed
// templates, substituting only the topic. The topic catalog ships both
// compiled in and under data/topics.json; a test keeps the two in sync.

#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "citeparse.hpp"

namespace citeaudit::prompts {

struct EmptyTopics : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TopicDomain {
    std::string name;
    std::vector<std::string> topics;
};

// ---- templates ----------------------------------------------------------------

inline constexpr const char* kParametricSystem =
    "You are a research assistant helping compile a literature review. For each paper you "
    "cite, always provide: (1) full title, (2) all author names, (3) journal or conference "
    "name, (4) year of publication. Only cite papers you are confident exist. List at least "
    "8 papers.";

inline constexpr const char* kSeminalUserTemplate =
    "List the most important and influential papers on {topic}. For each paper, provide the "
    "full title, all authors, journal or conference name, and year of publication.";

inline constexpr const char* kRecentUserTemplate =
    "What are the most significant recent advances (2020–2025) in {topic}? For each key "
    "paper, provide the full title, all authors, journal or conference name, and year of "
    "publication.";

inline constexpr const char* kPoolSystem =
    "You are a research assistant helping compile a literature review. You will be given a "
    "set of candidate papers on a topic. Select the 5 most relevant and important papers "
    "from the provided set. For each selected paper, explain in 1–2 sentences why it is "
    "important. ONLY select from the provided list. Do not add papers not in the list.";

inline constexpr const char* kPoolUserFooter =
    "Select the 5 most relevant papers from the list above and explain why each is "
    "important.";

inline constexpr const char* kControlSystem =
    "You are a knowledgeable research expert. Explain concepts clearly and thoroughly. Do "
    "NOT provide a literature review. Do NOT cite specific papers, authors, or references. "
    "Just explain the ideas, methods, and key findings in your own words.";

inline constexpr const char* kControlUserTemplate =
    "Explain the key concepts, methods, and important developments in {topic}. Focus on "
    "explaining the ideas clearly — do not provide citations or list specific papers.";

inline std::string substitute_topic(std::string text, const std::string& topic) {
    const std::string needle = "{topic}";
    size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), topic);
        pos += topic.size();
    }
    return text;
}

// ---- prompt specs ----------------------------------------------------------------

struct CandidateEntry {
    std::string title;
    std::string authors; // display string, e.g. "A. Vaswani, N. Shazeer, et al."
    int year = 0;
    std::string journal;
};

struct PromptSpec {
    citeparse::Condition condition = citeparse::Condition::parametric;
    std::string domain;
    std::string topic;
    citeparse::Framing framing = citeparse::Framing::none;
    int replication = 1;
    std::string system_prompt;
    std::string user_prompt;
    std::string prompt_id;
};

namespace detail {

inline std::string slug(const std::string& s) {
    std::string out;
    bool dash = false;
    for (char c : s) {
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            out.push_back(c);
            dash = false;
        } else if (c >= 'A' && c <= 'Z') {
            out.push_back(static_cast<char>(c - 'A' + 'a'));
            dash = false;
        } else if (!dash && !out.empty()) {
            out.push_back('-');
            dash = true;
        }
    }
    while (!out.empty() && out.back() == '-') out.pop_back();
    return out;
}

inline std::string prompt_id_of(const PromptSpec& spec, size_t topic_index) {
    std::string id = "c";
    switch (spec.condition) {
        case citeparse::Condition::parametric: id += '1'; break;
        case citeparse::Condition::candidate_pool: id += '2'; break;
        case citeparse::Condition::unprompted: id += '3'; break;
    }
    id += '-' + slug(spec.domain) + "-t";
    std::string n = std::to_string(topic_index + 1);
    if (n.size() < 2) n.insert(n.begin(), '0');
    id += n;
    if (spec.framing != citeparse::Framing::none)
        id += std::string("-") + citeparse::to_string(spec.framing);
    id += "-r" + std::to_string(spec.replication);
    return id;
}

} // namespace detail

inline std::string render_pool_user_prompt(const std::string& topic,
                                           const std::vector<CandidateEntry>& pool) {
    if (pool.empty()) throw std::invalid_argument("candidate pool must be non-empty");
    std::string out = "Topic: " + topic + "\n\nCandidate papers:\n\n";
    for (size_t i = 0; i < pool.size(); ++i) {
        const auto& e = pool[i];
        out += std::to_string(i + 1) + ". \"" + e.title + "\" by " + e.authors + " (" +
               std::to_string(e.year) + ") — " + e.journal + "\n";
    }
    out += '\n';
    out += kPoolUserFooter;
    return out;
}

struct GenerateOptions {
    std::vector<citeparse::Framing> framings = {citeparse::Framing::seminal,
                                                citeparse::Framing::recent};
    int replications = 3;
    bool include_control = false;
    // topic -> pool; condition-2 specs are rendered only for listed topics
    std::map<std::string, std::vector<CandidateEntry>> candidate_pools;
};

inline std::vector<PromptSpec> generate_prompt_set(const std::vector<TopicDomain>& domains,
                                                   const GenerateOptions& opt = {}) {
    if (domains.empty()) throw EmptyTopics("no topic domains supplied");
    for (const auto& d : domains)
        if (d.topics.empty()) throw EmptyTopics("domain has no topics: " + d.name);
    if (opt.replications < 1) throw std::invalid_argument("replications must be at least 1");

    std::vector<PromptSpec> specs;
    for (const auto& domain : domains) {
        for (size_t t = 0; t < domain.topics.size(); ++t) {
            const auto& topic = domain.topics[t];
            for (auto framing : opt.framings) {
                if (framing == citeparse::Framing::none)
                    throw std::invalid_argument(
                        "parametric prompts need a seminal or recent framing");
                for (int rep = 1; rep <= opt.replications; ++rep) {
                    PromptSpec s;
                    s.condition = citeparse::Condition::parametric;
                    s.domain = domain.name;
                    s.topic = topic;
                    s.framing = framing;
                    s.replication = rep;
                    s.system_prompt = kParametricSystem;
                    s.user_prompt = substitute_topic(framing == citeparse::Framing::seminal
                                                         ? kSeminalUserTemplate
                                                         : kRecentUserTemplate,
                                                     topic);
                    s.prompt_id = detail::prompt_id_of(s, t);
                    specs.push_back(std::move(s));
                }
            }
        }
    }
    if (!opt.candidate_pools.empty()) {
        for (const auto& domain : domains) {
            for (size_t t = 0; t < domain.topics.size(); ++t) {
                const auto& topic = domain.topics[t];
                auto pool = opt.candidate_pools.find(topic);
                if (pool == opt.candidate_pools.end()) continue;
                for (int rep = 1; rep <= opt.replications; ++rep) {
                    PromptSpec s;
                    s.condition = citeparse::Condition::candidate_pool;
                    s.domain = domain.name;
                    s.topic = topic;
                    s.framing = citeparse::Framing::none;
                    s.replication = rep;
                    s.system_prompt = kPoolSystem;
                    s.user_prompt = render_pool_user_prompt(topic, pool->second);
                    s.prompt_id = detail::prompt_id_of(s, t);
                    specs.push_back(std::move(s));
                }
            }
        }
    }
    if (opt.include_control) {
        for (const auto& domain : domains) {
            for (size_t t = 0; t < domain.topics.size(); ++t) {
                const auto& topic = domain.topics[t];
                for (int rep = 1; rep <= opt.replications; ++rep) {
                    PromptSpec s;
                    s.condition = citeparse::Condition::unprompted;
                    s.domain = domain.name;
                    s.topic = topic;
                    s.framing = citeparse::Framing::none;
                    s.replication = rep;
                    s.system_prompt = kControlSystem;
                    s.user_prompt = substitute_topic(kControlUserTemplate, topic);
                    s.prompt_id = detail::prompt_id_of(s, t);
                    specs.push_back(std::move(s));
                }
            }
        }
    }
    return specs;
}

// ---- serialization ---------------------------------------------------------------

inline constexpr const char* kTopicsVersion = "topics.v1";

inline nlohmann::json domains_to_json(const std::vector<TopicDomain>& domains) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : domains) arr.push_back({{"name", d.name}, {"topics", d.topics}});
    return nlohmann::json{{"version", kTopicsVersion}, {"domains", arr}};
}

inline std::vector<TopicDomain> domains_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("version") || !j.contains("domains") || j.size() != 2)
        throw std::invalid_argument("topic catalog must hold exactly version and domains");
    if (j.at("version").get<std::string>() != kTopicsVersion)
        throw std::invalid_argument("unsupported topic catalog version");
    std::vector<TopicDomain> domains;
    for (const auto& dj : j.at("domains")) {
        if (!dj.is_object() || !dj.contains("name") || !dj.contains("topics") || dj.size() != 2)
            throw std::invalid_argument("topic domain must hold exactly name and topics");
        TopicDomain d;
        dj.at("name").get_to(d.name);
        dj.at("topics").get_to(d.topics);
        domains.push_back(std::move(d));
    }
    return domains;
}

inline std::vector<TopicDomain> load_domains(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open topic catalog: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("cannot parse topic catalog " + path.string() + ": " +
                                 e.what());
    }
    return domains_from_json(j);
}

inline nlohmann::json spec_to_json(const PromptSpec& s) {
    return nlohmann::json{
        {"prompt_id", s.prompt_id},
        {"condition", citeparse::to_string(s.condition)},
        {"domain", s.domain},
        {"topic", s.topic},
        {"framing", citeparse::to_string(s.framing)},
        {"replication", s.replication},
        {"system_prompt", s.system_prompt},
        {"user_prompt", s.user_prompt},
    };
}

inline PromptSpec spec_from_json(const nlohmann::json& j) {
    PromptSpec s;
    j.at("prompt_id").get_to(s.prompt_id);
    s.condition = citeparse::condition_from_string(j.at("condition").get<std::string>());
    j.at("domain").get_to(s.domain);
    j.at("topic").get_to(s.topic);
    s.framing = citeparse::framing_from_string(j.at("framing").get<std::string>());
    j.at("replication").get_to(s.replication);
    j.at("system_prompt").get_to(s.system_prompt);
    j.at("user_prompt").get_to(s.user_prompt);
    return s;
}

// ---- topic catalog ---------------------------------------------------------------

inline const std::vector<TopicDomain>& default_domains() {
    static const std::vector<TopicDomain> domains = {
        {"Structural Engineering",
         {"seismic design of steel moment frames",
          "fiber-reinforced polymer strengthening of concrete bridges",
          "progressive collapse resistance in tall buildings",
          "performance-based earthquake engineering methods",
          "wind load effects on long-span cable-stayed bridges",
          "fatigue life prediction in welded steel connections",
          "soil–structure interaction for deep foundations",
          "shape memory alloy dampers for seismic protection",
          "machine learning for structural health monitoring",
          "digital twin frameworks for bridge management",
          "buckling restrained braces in seismic design",
          "ultra-high performance concrete applications",
          "topology optimization in structural design",
          "corrosion monitoring of reinforced concrete structures",
          "base isolation systems for building structures",
          "robustness assessment of truss structures",
          "nonlinear finite element modeling of shear walls",
          "post-tensioned timber connections",
          "resilience metrics for infrastructure systems",
          "drone-based inspection of civil infrastructure",
          "3D printing of concrete structures",
          "composite floor systems in high-rise buildings",
          "fire resistance of steel–concrete composite beams",
          "seismic retrofit of masonry buildings",
          "lifecycle cost analysis of bridge systems",
          "machine learning in structural engineering"}},
        {"NLP/AI",
         {"transformer architectures for natural language understanding",
          "retrieval augmented generation for question answering",
          "large language model alignment techniques",
          "bias and fairness in text classification models",
          "few-shot learning for named entity recognition",
          "multilingual pre-training strategies",
          "hallucination detection in language models",
          "prompt engineering for instruction following",
          "reinforcement learning from human feedback",
          "chain-of-thought reasoning in large language models",
          "knowledge graph completion with neural methods",
          "text summarization using abstractive approaches",
          "sentiment analysis across social media platforms",
          "neural machine translation for low-resource languages",
          "zero-shot classification with vision–language models",
          "synthetic data generation for training language models",
          "efficient inference for large language models",
          "safety evaluation benchmarks for AI systems",
          "multimodal learning combining text and images",
          "federated learning for privacy-preserving NLP",
          "document-level relation extraction",
          "code generation with large language models",
          "contrastive learning for sentence embeddings",
          "long-context modeling in transformers",
          "tool use and function calling in language models"}},
        {"Biomedical",
         {"CRISPR gene editing therapeutic applications",
          "single-cell RNA sequencing analysis methods",
          "deep learning for medical image diagnosis",
          "drug repurposing using network pharmacology",
          "mRNA vaccine design and optimization",
          "gut microbiome and mental health connections",
          "wearable biosensors for continuous health monitoring",
          "protein structure prediction with AlphaFold",
          "immunotherapy resistance mechanisms in cancer",
          "electronic health record mining for clinical insights",
          "organoid models for disease modeling",
          "spatial transcriptomics methods and applications",
          "CAR-T cell therapy optimization",
          "antibiotic resistance surveillance using genomics",
          "federated learning in multi-site clinical studies",
          "liquid biopsy for early cancer detection",
          "brain–computer interfaces for motor rehabilitation",
          "machine learning for drug–drug interaction prediction",
          "epigenetic clocks and biological age estimation",
          "digital pathology and whole-slide image analysis",
          "nanomedicine for targeted drug delivery",
          "real-world evidence from health insurance claims data",
          "radiomics and imaging biomarkers in oncology",
          "natural language processing of clinical notes",
          "multi-omics integration for precision medicine"}},
        {"Climate/Environment",
         {"climate model downscaling with machine learning",
          "carbon capture and storage monitoring technologies",
          "urban heat island mitigation strategies",
          "remote sensing of deforestation rates",
          "ocean acidification impacts on coral reefs",
          "renewable energy integration into power grids",
          "methane emission detection using satellite data",
          "flood risk assessment under climate change scenarios",
          "soil carbon sequestration measurement methods",
          "biodiversity loss indicators and monitoring frameworks",
          "life cycle assessment of electric vehicles",
          "coastal erosion prediction models",
          "air quality forecasting with deep learning",
          "permafrost thaw and greenhouse gas release",
          "circular economy metrics and assessment tools",
          "wildfire spread modeling and prediction",
          "water scarcity projections for arid regions",
          "green building certification effectiveness",
          "climate change attribution science",
          "battery recycling and second-life applications",
          "microplastic transport in freshwater systems",
          "climate finance flows to developing nations",
          "glacier mass balance monitoring techniques",
          "sustainable agriculture and precision farming",
          "nature-based solutions for flood management"}}};
    return domains;
}

} // namespace citeaudit::prompts
