// The bundled 1920s mystery preset. Mirrors the server package's
// data/halloran_house_criteria.json; keep the two in sync.

import type { DesignerCriteria } from "./types.js";

export const PRESET_CRITERIA: DesignerCriteria = {
  genre: "murder mystery, grounded realism",
  location_hint: "a grand mansion in New York City",
  time_period_hint: "the early 1920s",
  tone: "noir tension beneath jazz-age glamour",
  player_role_hint: "a seasoned detective called in to untangle the case",
  npc_count: 3,
  mechanics: [
    { id: "interrogate_suspect", label: "Interrogate Suspect", template_id: "mechanic_interrogate" },
    { id: "search_crime_scene", label: "Search Crime Scene", template_id: "mechanic_search" },
    { id: "call_informant", label: "Call Informant", template_id: "mechanic_informant" },
  ],
  notes:
    "The matriarch of Halloran House has been found dead in her study. Everyone under the roof had a reason to want her gone.",
};
