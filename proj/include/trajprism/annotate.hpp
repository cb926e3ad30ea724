#ifndef TRAJPRISM_ANNOTATE_HPP
#define TRAJPRISM_ANNOTATE_HPP

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trajprism/geo.hpp"
#include "trajprism/intent.hpp"
#include "trajprism/jsonl.hpp"
#include "trajprism/provider.hpp"
#include "trajprism/traj.hpp"

namespace trajprism {

/// The seven user-facing instances, in output order.
inline constexpr std::array<std::string_view, 7> kUserFields = {
    "instruction_literal", "instruction_concise", "instruction_chatty", "retrieval_query_1",
    "retrieval_query_2",   "retrieval_query_3",   "trajectory_caption"};

struct AnnotationRecord {
    TrajId traj_id = 0;
    std::string intent_planning;
    std::string retrieval_planning;
    std::string instruction_literal;
    std::string instruction_concise;
    std::string instruction_chatty;
    std::string retrieval_query_1;
    std::string retrieval_query_2;
    std::string retrieval_query_3;
    std::string trajectory_caption;

    /// Field by index into kUserFields.
    std::string& field(std::size_t i);
    const std::string& field(std::size_t i) const;

    std::array<std::string, 3> instructions() const {
        return {instruction_literal, instruction_concise, instruction_chatty};
    }
    std::array<std::string, 3> queries() const {
        return {retrieval_query_1, retrieval_query_2, retrieval_query_3};
    }

    friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

ordered_json record_to_json(const AnnotationRecord& r);

/// Throws SchemaError when a user-facing field is missing, not a string, or empty.
AnnotationRecord record_from_json(const json& obj);

/// Locates the JSON object in a provider reply (code fences and leading
/// prose are tolerated) and validates it.
AnnotationRecord parse_generation(std::string_view text, TrajId traj_id);

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::vector<AnnotationRecord>& rs, const std::filesystem::path& path);

/// Case-insensitive whole-token replacements for GIS labels.
using TerminologyMap = std::vector<std::pair<std::string, std::string>>;
const TerminologyMap& default_terminology();

/// Reads `LABEL = phrase` lines.
TerminologyMap load_terminology(const std::filesystem::path& path);

/// Fields of a cell description written as "GNN: LABEL | Narrative: ... |
/// POIs: a, b | District: d". Unknown parts are ignored.
struct DescriptionFields {
    std::string label;
    std::string narrative;
    std::vector<std::string> pois;
    std::string district;
};

DescriptionFields parse_description(std::string_view desc);

/// Plain-language area phrase for a description's label, or empty.
std::string area_phrase(std::string_view desc, const TerminologyMap& terms = default_terminology());

/// Caption prompts carry this marker line followed by a JSON context block.
inline constexpr std::string_view kCaptionContextMarker = "CAPTION CONTEXT";

const std::string& annotation_system_prompt();

/// Throws InvalidAssignment when the three queries leave a dimension uncovered.
PromptBundle build_prompt(const PhaseSeq& ps, const IntentProfile& profile, const PersonaStyle& style,
                          const RetrievalAssignment& assignment, std::string_view constraints = {});

/// Deterministic offline generator. Annotation prompts are answered with a
/// filled template drawn from the trailing trajectory JSON; caption prompts
/// with a caption drawn from the caption context block.
class TemplateGenerator final : public Generator {
public:
    explicit TemplateGenerator(TerminologyMap terms = default_terminology())
        : terms_(std::move(terms)) {}

    std::string complete(const PromptBundle& p) override;
    std::string name() const override { return "template"; }

private:
    std::string annotate(const std::string& user) const;
    std::string caption(const std::string& user) const;

    TerminologyMap terms_;
};

/// Remote provider when TRAJPRISM_PROVIDER_URL is set, else the template generator.
std::unique_ptr<Generator> make_generator(int max_in_flight = 4);

/// Calls the generator; a malformed reply is retried once, then SchemaError.
AnnotationRecord generate(Generator& gen, const PromptBundle& p, TrajId traj_id);

// ---- quality control ----

enum class MentionRole : std::uint8_t { Any, Origin, Destination };

struct Mention {
    std::string field;
    std::string name; ///< normalized gazetteer entry
    MentionRole role = MentionRole::Any;
    bool grounded = false;
    std::string reason; ///< empty when grounded
};

struct GroundingReport {
    std::vector<Mention> mentions;

    std::size_t ungrounded_count() const;
    std::vector<Mention> ungrounded() const;
};

/// Gazetteer names occurring in `text`, longest match first, never across
/// clause punctuation.
std::vector<std::string> find_mentions(std::string_view text, const std::set<std::string>& gazetteer);

/// Mentions with their cue role: "from"/"starting on" mark origins, "to",
/// "towards", "arriving at", "ending at", "ends on", "finish at" mark destinations.
std::vector<std::pair<std::string, MentionRole>> find_role_mentions(
    std::string_view text, const std::set<std::string>& gazetteer);

GroundingReport qc_grounding(const AnnotationRecord& rec, const PhaseSeq& ps, const CellIndex& cells);

/// Applies the terminology map to one string.
std::string apply_terminology(std::string_view text, const TerminologyMap& terms);
AnnotationRecord qc_terminology(const AnnotationRecord& rec,
                                const TerminologyMap& terms = default_terminology());

/// Em-dashes become ", " and semicolons ",".
std::string sanitize_punctuation(std::string_view text);
AnnotationRecord qc_punctuation(const AnnotationRecord& rec);

struct DiversityResult {
    bool pass = true;
    std::vector<std::string> reasons;
};

/// Unigram Jaccard over normalized word sets.
double unigram_jaccard(std::string_view a, std::string_view b);

DiversityResult qc_diversity(const AnnotationRecord& rec, double max_jaccard = 0.8);

struct HallucinationResult {
    bool flagged = false;
    std::vector<std::string> spans;
    std::string rationale;
    bool degraded = false; ///< provider failed, heuristic used instead
};

/// Capitalized multiword spans (two or more capitalized tokens, lowercase
/// connectors allowed inside) not covered by a gazetteer name.
std::vector<std::string> capitalized_entities(std::string_view text, const std::set<std::string>& gazetteer);

inline constexpr std::array<std::string_view, 10> kCriteria = {
    "t1_correctness",           "t1_no_hallucination", "t1_persona_fidelity", "t1_style_distinctness",
    "t2_retrieval_specificity", "t2_accuracy",         "t2_no_hallucination", "t3_comprehensiveness",
    "t3_accuracy",              "t3_objectivity_purity"};

struct ScoreCard {
    TrajId item = 0;
    std::string judge_id;
    std::array<int, 10> scores{};

    double mean() const;
    friend bool operator==(const ScoreCard&, const ScoreCard&) = default;
};

json scorecard_to_json(const ScoreCard& c);
ScoreCard scorecard_from_json(const json& obj);

/// Everything the default judge inspects.
struct QcOutcome {
    GroundingReport grounding;
    DiversityResult diversity;
    HallucinationResult hallucination;
};

class Judge {
public:
    virtual ~Judge() = default;
    virtual std::string id() const = 0;

    /// Suspect entity spans in the record's user-facing text.
    virtual std::vector<std::string> suspect_spans(const AnnotationRecord& rec, const PhaseSeq& ps,
                                                   const CellIndex& cells) = 0;

    /// Raw criterion scores in kCriteria order; may be out of range.
    virtual std::array<int, 10> raw_scores(const AnnotationRecord& rec, const PhaseSeq& ps,
                                           const CellIndex& cells, const QcOutcome& qc) = 0;
};

/// Maps QC outcomes to scores: hallucination flag gives no_hallucination 2;
/// 0/1/2+ ungrounded mentions give 5/4/3 on the accuracy-type criteria.
class HeuristicJudge final : public Judge {
public:
    std::string id() const override { return "heuristic"; }
    std::vector<std::string> suspect_spans(const AnnotationRecord& rec, const PhaseSeq& ps,
                                           const CellIndex& cells) override;
    std::array<int, 10> raw_scores(const AnnotationRecord& rec, const PhaseSeq& ps,
                                   const CellIndex& cells, const QcOutcome& qc) override;
};

/// Judge backed by a text generator; expects a JSON reply of
/// {"suspects": [...]} or {criterion: score, ...}.
class ProviderJudge final : public Judge {
public:
    explicit ProviderJudge(Generator& gen) : gen_(gen) {}
    std::string id() const override { return "provider:" + gen_.name(); }
    std::vector<std::string> suspect_spans(const AnnotationRecord& rec, const PhaseSeq& ps,
                                           const CellIndex& cells) override;
    std::array<int, 10> raw_scores(const AnnotationRecord& rec, const PhaseSeq& ps,
                                   const CellIndex& cells, const QcOutcome& qc) override;

private:
    Generator& gen_;
};

HallucinationResult qc_hallucination(Judge& judge, const AnnotationRecord& rec, const PhaseSeq& ps,
                                     const CellIndex& cells);

QcOutcome run_qc(Judge& judge, const AnnotationRecord& rec, const PhaseSeq& ps, const CellIndex& cells);

struct JudgeResult {
    ScoreCard card;
    std::vector<std::string> warnings;
};

/// Scores outside 1..5 are clamped and reported as warnings.
JudgeResult judge_score(Judge& judge, const AnnotationRecord& rec, const PhaseSeq& ps,
                        const CellIndex& cells, const QcOutcome& qc);

struct Agreement {
    std::array<double, 10> per_criterion{};
    double mean = 0.0;
};

/// Fraction of items with |a - b| <= 1, per criterion. Throws
/// InvalidArgument when the item ids do not line up.
Agreement agreement_pm1(const std::vector<ScoreCard>& a, const std::vector<ScoreCard>& b);

/// Top n by mean criterion score, ties to the smaller traj id.
std::vector<TrajId> select_top(const std::vector<std::pair<TrajId, ScoreCard>>& scored, std::size_t n);

json qc_outcome_to_json(TrajId id, const QcOutcome& qc);

} // namespace trajprism

#endif // TRAJPRISM_ANNOTATE_HPP
