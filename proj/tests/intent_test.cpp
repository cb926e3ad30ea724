#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <set>

#include "trajprism/error.hpp"
#include "trajprism/intent.hpp"
#include "test_support.hpp"

using namespace trajprism;
using trajprism::testing::TempDir;

TEST(SampleProfile, CountDistributionMatchesWeights) {
    constexpr int kDraws = 100000;
    std::array<int, 5> counts{};
    for (int i = 0; i < kDraws; ++i) {
        const IntentProfile p = sample_profile(42, i);
        ASSERT_GE(p.k(), 1u);
        ASSERT_LE(p.k(), 5u);
        ++counts[p.k() - 1];
    }
    for (std::size_t k = 0; k < 5; ++k) {
        EXPECT_NEAR(static_cast<double>(counts[k]) / kDraws, kScenarioCountWeights[k], 0.01) << "k=" << k + 1;
    }
}

TEST(SampleProfile, StructuralInvariants) {
    std::map<std::string, int> freq;
    for (int i = 0; i < 20000; ++i) {
        const IntentProfile p = sample_profile(7, i);
        int dim1 = 0;
        bool has_33 = false, has_31_32 = false;
        for (std::size_t j = 0; j < p.scenarios.size(); ++j) {
            const Scenario& s = scenario(p.scenarios[j]);
            if (s.dimension == 1) ++dim1;
            if (j > 0) EXPECT_LT(p.scenarios[j - 1], p.scenarios[j]);
            has_33 = has_33 || s.id == "3.3";
            has_31_32 = has_31_32 || s.id == "3.1" || s.id == "3.2";
            ++freq[p.scenarios[j]];
        }
        EXPECT_EQ(dim1, 1);
        EXPECT_EQ(p.orthogonal_cooccurrence, has_33 && has_31_32);
        if (p.k() == 1) EXPECT_EQ(scenario(p.scenarios[0]).dimension, 1);
    }
    // Destination scenarios split evenly; the other eight share the remaining draws evenly.
    EXPECT_NEAR(freq["1.1"] / 20000.0, 0.5, 0.02);
    const double other = freq["2.1"];
    for (const auto& s : kScenarios) {
        if (s.dimension != 1) EXPECT_NEAR(freq[std::string(s.id)] / other, 1.0, 0.1) << s.id;
    }
}

TEST(SampleProfile, Deterministic) {
    for (int i = 0; i < 100; ++i) {
        const IntentProfile a = sample_profile(3, i);
        const IntentProfile b = sample_profile(3, i);
        EXPECT_EQ(a.scenarios, b.scenarios);
        EXPECT_EQ(profile_from_json(profile_to_json(a)).scenarios, a.scenarios);
    }
    int differ = 0;
    for (int i = 0; i < 100; ++i) differ += sample_profile(3, i).scenarios != sample_profile(4, i).scenarios;
    EXPECT_GT(differ, 30);
}

TEST(SampleProfile, LabelLine) {
    IntentProfile p;
    p.scenarios = {"1.1", "2.2", "3.2"};
    EXPECT_EQ(scenario_label_line(p), "1.1 + 2.2 + 3.2");
    EXPECT_THROW(scenario("9.9"), InvalidArgument);
}

TEST(PersonaStyle, UniformOverPools) {
    const StylePools& pools = default_pools();
    std::map<std::string, int> persona, form;
    constexpr int kDraws = 60000;
    for (int i = 0; i < kDraws; ++i) {
        const PersonaStyle s = sample_persona_style(11, i);
        ++persona[s.persona];
        ++form[s.chatty.sentence_form];
    }
    EXPECT_EQ(persona.size(), pools.persona.size());
    for (const auto& p : pools.persona) {
        EXPECT_NEAR(persona[p] / static_cast<double>(kDraws), 1.0 / pools.persona.size(), 0.01) << p;
    }
    EXPECT_EQ(form.size(), pools.chatty_forms.size());
    for (const auto& f : pools.chatty_forms) {
        EXPECT_NEAR(form[f] / static_cast<double>(kDraws), 1.0 / pools.chatty_forms.size(), 0.01) << f;
    }
}

TEST(PersonaStyle, SingletonAndEmptyPools) {
    StylePools one = default_pools();
    one.persona = {"courier"};
    for (int i = 0; i < 50; ++i) EXPECT_EQ(sample_persona_style(1, i, one).persona, "courier");
    StylePools empty = default_pools();
    empty.concise_lengths.clear();
    EXPECT_THROW(sample_persona_style(1, 0, empty), ConfigError);
}

TEST(PersonaStyle, JsonRoundTrip) {
    const PersonaStyle s = sample_persona_style(5, 9);
    const PersonaStyle r = persona_style_from_json(persona_style_to_json(s));
    EXPECT_EQ(r.persona, s.persona);
    EXPECT_EQ(r.chatty.sentence_form, s.chatty.sentence_form);
    EXPECT_EQ(r.literal.length, s.literal.length);
}

TEST(LoadPools, OverridesAndUnknownKeys) {
    TempDir tmp;
    std::ofstream(tmp / "pools.txt") << "# custom\npersona[] = night nurse\npersona = cyclist\n";
    const StylePools p = load_pools(tmp / "pools.txt");
    EXPECT_EQ(p.persona, (std::vector<std::string>{"night nurse", "cyclist"}));
    EXPECT_EQ(p.chatty_forms, default_pools().chatty_forms);

    std::ofstream(tmp / "bad.txt") << "moods = happy\n";
    EXPECT_THROW(load_pools(tmp / "bad.txt"), ConfigError);
    EXPECT_THROW(load_pools(tmp / "missing.txt"), ConfigError);
}

TEST(Assignment, CoversEveryDimension) {
    std::map<int, int> q2;
    for (int i = 0; i < 3000; ++i) {
        const RetrievalAssignment a = sample_assignment(8, i);
        EXPECT_TRUE(covers_all_dimensions(a));
        ASSERT_EQ(a[0].size(), 2u);
        EXPECT_EQ(a[0][0], 1);
        EXPECT_EQ(a[1].size(), 1u);
        EXPECT_EQ(a[2].size(), 1u);
        ++q2[a[1][0]];
    }
    EXPECT_EQ(q2.size(), 3u);
    EXPECT_FALSE(covers_all_dimensions({std::vector<int>{1, 2}, {2}, {3}}));
    EXPECT_EQ(assignment_label({1, 2}), "Dim 1 Destination + Dim 2 Waypoint");
}
