#include <gtest/gtest.h>

#include <set>

#include "test_support.hpp"
#include "vvgen/error.hpp"
#include "vvgen/pipeline.hpp"
#include "vvgen/prompt_forge.hpp"

using namespace vvgen;

namespace {

const std::filesystem::path kRoot = VVGEN_SOURCE_DIR;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no vvgen::Error thrown";
  return ErrorCode::InvalidParams;
}

AssetLibrary tiny_assets() {
  AssetLibrary a;
  a.templates[Language::C] = "#include \"acc_testsuite.h\"\nint main(){\n    return 0;\n}\n";
  a.oneshot[Language::C] = {"Example request.", "int main(){ return 0; }\n"};
  return a;
}

FeatureSelection outline_selection() {
  FeatureSelection s;
  s.exclude = {"2.1",   "2.2",   "2.3",   "2.4",   "2.5.4", "2.5.5", "2.6.1", "2.6.2",
               "2.6.3", "2.6.7", "2.6.8", "2.7.1", "2.7.2", "2.7.3", "3.1"};
  return s;
}

SpecIndex outline() { return load_spec_index(kRoot / "data/openacc-3.3-outline.txt"); }

}  // namespace

TEST(RenderPrompt, ExpressiveGolden) {
  const FeatureSpec f{"compute construct num_gangs clause", "2.5.10", Language::C, std::nullopt};
  RetrievedContext ctx{"The num_gangs clause is allowed on the parallel and kernels constructs.", {"chunk:4"}, false};
  const auto r = render_prompt(PromptMethod::ExpressiveTemplateRag, f, tiny_assets(), ctx);
  EXPECT_EQ(r.text, read_file(kRoot / "tests/golden/expressive_prompt_c.txt"));
  EXPECT_EQ(r.text.rfind("Write a code in C to verify compiler implementation of the OpenACC specification of", 0), 0u);
  EXPECT_EQ(r.context_provenance, std::vector<std::string>{"chunk:4"});
  EXPECT_EQ(r.template_id, "templates/C");
  EXPECT_FALSE(r.oneshot_id);
}

TEST(RenderPrompt, PlaceholdersInValuesAreNotExpanded) {
  const FeatureSpec f{"x {feature} y", "2.5.10", Language::C, std::nullopt};
  RetrievedContext ctx{"{template}", {}, false};
  const auto r = render_prompt(PromptMethod::TemplateRag, f, tiny_assets(), ctx);
  EXPECT_NE(r.text.find("Context: {template}\n"), std::string::npos);
  EXPECT_NE(r.text.find("x {feature} y."), std::string::npos);
}

TEST(RenderPrompt, EveryMethodStartsFromTheRequest) {
  const FeatureSpec f{"parallel construct", "2.5.1", Language::C, std::nullopt};
  RetrievedContext ctx{"ctx", {"section:2.5.1"}, false};
  for (auto m : kAllPromptMethods) {
    const auto r = render_prompt(m, f, tiny_assets(), ctx);
    EXPECT_NE(r.text.find(request_sentence(f)), std::string::npos) << to_string(m);
    EXPECT_EQ(r.text.find("ctx") != std::string::npos, is_rag(m)) << to_string(m);
    EXPECT_EQ(r.oneshot_id.has_value(), uses_oneshot(m));
    EXPECT_EQ(r.template_id.has_value(), !uses_oneshot(m));
  }
}

TEST(RenderPrompt, EmptyContextAndMissingAsset) {
  const FeatureSpec c{"parallel construct", "2.5.1", Language::C, std::nullopt};
  const FeatureSpec fortran{"parallel construct", "2.5.1", Language::Fortran, std::nullopt};
  EXPECT_EQ(code_of([&] { render_prompt(PromptMethod::TemplateRag, c, tiny_assets(), {}); }),
            ErrorCode::EmptyContext);
  EXPECT_NO_THROW(render_prompt(PromptMethod::Template, c, tiny_assets(), {}));
  EXPECT_EQ(code_of([&] { render_prompt(PromptMethod::Template, fortran, tiny_assets(), {}); }),
            ErrorCode::MissingAsset);
  EXPECT_EQ(code_of([&] { render_prompt(PromptMethod::OneShot, fortran, tiny_assets(), {}); }),
            ErrorCode::MissingAsset);
}

TEST(PromptId, StableAndDistinct) {
  const FeatureSpec f{"parallel construct", "2.5.1", Language::C, std::nullopt};
  const auto a = make_prompt_id("s", "m", PromptMethod::Template, f);
  EXPECT_EQ(a.size(), 16u);
  EXPECT_EQ(a, make_prompt_id("s", "m", PromptMethod::Template, f));
  EXPECT_NE(a, make_prompt_id("s", "m2", PromptMethod::Template, f));
  EXPECT_NE(a, make_prompt_id("s", "m", PromptMethod::OneShot, f));
  auto g = f;
  g.base_language = Language::Cpp;
  EXPECT_NE(a, make_prompt_id("s", "m", PromptMethod::Template, g));
}

TEST(PromptRecordJson, RoundTrip) {
  const FeatureSpec f{"serial construct num_gangs clause", "2.5.10", Language::Fortran, "serial construct"};
  PromptRecord r;
  r.id = "abc";
  r.stage = "st";
  r.llm = "model";
  r.method = PromptMethod::OneShotRag;
  r.feature = f;
  r.text = "line\n\"quoted\"\n";
  r.context_provenance = {"chunk:1", "chunk:2"};
  r.oneshot_id = "oneshot/Fortran";
  EXPECT_EQ(prompt_from_json(Json::parse(to_json(r).dump())), r);
}

TEST(FeatureNames, ClausesTakeTheirConstruct) {
  const auto text = fixtures::sample_spec_text();
  const auto index = slice_sections(text, parse_toc(text));
  EXPECT_EQ(derive_feature_name(index, lookup_section(index, "2.5.10")), "compute construct num_gangs clause");
  EXPECT_EQ(derive_feature_name(index, lookup_section(index, "2.5.1")), "parallel construct");
  EXPECT_EQ(derive_feature_name(index, lookup_section(index, "3.2.1")), "acc_get_num_devices");
}

TEST(EnumerateFeatures, LeavesOnlyWithExclusions) {
  const auto text = fixtures::sample_spec_text();
  const auto index = slice_sections(text, parse_toc(text));
  FeatureSelection sel;
  sel.exclude = {"2.6"};
  const auto f = enumerate_features(index, sel, {Language::C, Language::Fortran});
  // Leaves: 2.5.1 2.5.2 2.5.3 2.5.10 2.5.11 3.2.1 (2.6.5 excluded)
  ASSERT_EQ(f.size(), 12u);
  EXPECT_EQ(f[0].section_key, "2.5.1");
  EXPECT_EQ(f[6].base_language, Language::Fortran);
  sel.include = {"9"};
  EXPECT_EQ(code_of([&] { enumerate_features(index, sel, {Language::C}); }), ErrorCode::EmptySelection);
}

TEST(EnumerateFeatures, ShippedOutlineGives95PerLanguage) {
  const auto index = outline();
  EXPECT_EQ(enumerate_features(index, outline_selection(), {Language::C}).size(), 95u);
  const auto all = enumerate_features(index, outline_selection(), {Language::C, Language::Cpp, Language::Fortran});
  EXPECT_EQ(all.size(), 285u);
  const auto permuted = expand_permutations(all, default_compute_construct_rules());
  EXPECT_EQ(permuted.size(), 351u);
  std::set<std::pair<std::string, std::string>> features;
  std::set<std::string> names;
  for (const auto& p : permuted) {
    if (p.base_language != Language::C) continue;
    features.emplace(p.name, p.section_key);
    names.insert(p.name);
  }
  EXPECT_EQ(features.size(), 117u);
  EXPECT_EQ(names.count("serial construct num_gangs clause"), 1u);
  EXPECT_EQ(names.count("kernels construct default clause"), 1u);
  EXPECT_EQ(names.count("compute construct if clause"), 0u);
  // Two sections share the title "Wait Directive"; they stay distinct by key.
  EXPECT_EQ(features.count({"wait directive", "2.14.5"}), 1u);
  EXPECT_EQ(features.count({"wait directive", "2.16.3"}), 1u);
}

TEST(ExpandPermutations, ReplacesPlaceholderOrPrefixes) {
  const std::vector<FeatureSpec> in{{"compute construct if clause", "2.5.6", Language::C, std::nullopt},
                                    {"parallel construct", "2.5.1", Language::C, std::nullopt},
                                    {"data construct", "2.6.5", Language::C, std::nullopt}};
  const auto out = expand_permutations(in, default_compute_construct_rules());
  ASSERT_EQ(out.size(), 5u);
  EXPECT_EQ(out[0].name, "parallel construct if clause");
  EXPECT_EQ(out[1].name, "serial construct if clause");
  EXPECT_EQ(out[2].name, "kernels construct if clause");
  EXPECT_EQ(out[2].permutation_of, "kernels construct");
  EXPECT_EQ(out[3].name, "parallel construct");
  EXPECT_FALSE(out[3].permutation_of);

  PermutationRules prefix{{"2.6.", "", "", {"a", "b"}}};
  const auto p = expand_permutations(in, prefix);
  ASSERT_EQ(p.size(), 4u);
  EXPECT_EQ(p[2].name, "a data construct");
}

TEST(PlanArithmetic, ShippedPlan) {
  const auto config = load_plan(kRoot / "configs/two_stage_plan.json");
  const auto index = load_spec_index(config.spec_path, config.heading);
  const auto a = plan_arithmetic(config.stages, index);
  EXPECT_EQ(a.suites.size(), 35u);
  EXPECT_EQ(a.total_prompts, 5117u);
  std::map<std::string, std::size_t> per_stage;
  for (const auto& s : a.suites) per_stage[s.stage] += s.prompts;
  EXPECT_EQ(per_stage["stage1-base"], 25u * 95u);
  EXPECT_EQ(per_stage["stage1-finetuned"], 3u * 95u);
  EXPECT_EQ(per_stage["stage2"], 7u * 351u);
}

TEST(BuildPromptSuite, OrderAndUniqueIds) {
  const auto text = fixtures::sample_spec_text();
  const auto index = slice_sections(text, parse_toc(text));
  LocalHashEmbedder e;
  const auto store = build_store(text, e, 150, 30);
  StagePlan stage;
  stage.name = "s";
  stage.llms = {"m1", "m2"};
  stage.methods = {PromptMethod::Template, PromptMethod::ExpressiveTemplateRag};
  stage.selection.include = {"2.5"};
  const auto prompts = build_prompt_suite({stage}, index, store, tiny_assets(), e);
  ASSERT_EQ(prompts.size(), 2u * 2u * 5u);
  EXPECT_EQ(prompts[0].llm, "m1");
  EXPECT_EQ(prompts[5].method, PromptMethod::ExpressiveTemplateRag);
  EXPECT_EQ(prompts[10].llm, "m2");
  std::set<std::string> ids;
  for (const auto& p : prompts) ids.insert(p.id);
  EXPECT_EQ(ids.size(), prompts.size());
  EXPECT_EQ(plan_arithmetic({stage}, index).total_prompts, prompts.size());
}

TEST(LoadAssets, ShippedAssets) {
  const auto a = load_assets(kRoot / "assets");
  EXPECT_EQ(a.templates.size(), 3u);
  EXPECT_EQ(a.oneshot.size(), 3u);
  EXPECT_NE(a.templates.at(Language::Fortran).find("acc_testsuite.Fh"), std::string::npos);
}
