#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "recpo/pipeline.hpp"
#include "recpo/types.hpp"

namespace recpo {

struct PromptRecord {
    std::string prompt;
    std::string chosen;
    std::vector<std::string> rejected;
    std::int64_t user_id = 0;
    int t = 0;
    ItemEvidence preferred;
    std::vector<ItemEvidence> dispreferred;
    std::vector<double> margins;  // one per rejected item
};

// Instruction paraphrases; one is picked per record by seeded hash.
const std::vector<std::string>& prompt_templates();

// Three blocks: rated history, bare-title candidates, instruction. History
// lines carry "| Rating: r" only when include_scores is set; Filtered mode
// drops low-scored history lines. Candidate display order is shuffled per
// record so the ground truth's slot carries no signal.
std::string render_prompt(const UserSequence& seq, int t, const CandidateSet& candidates,
                          const std::map<std::int64_t, std::string>& titles,
                          const RunConfig& cfg);

PromptRecord build_prompt_record(const UserSequence& seq, const TrainCutRecord& cut,
                                 const std::map<std::int64_t, std::string>& titles,
                                 const RunConfig& cfg);

void export_jsonl(const std::vector<PromptRecord>& records, const std::string& path);
std::vector<PromptRecord> import_jsonl(const std::string& path);

}  // namespace recpo
