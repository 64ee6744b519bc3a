/** Payload shapes of the gateway's /api/v1 endpoints. */

export interface Envelope<T> {
  payload: T | null;
  error: { code: string; message: string } | null;
}

export interface HealthPayload {
  status: string;
  revision: number;
}

export interface ComponentDetails {
  name: string;
  use_oscilloscope: boolean;
  affected_by: string[];
  sets: { name: string; verified_by: string; members: string[] }[];
}

export interface FaultContextDetails {
  dtc_code: string;
  condition: string;
  symptoms: string[];
  suspects: { component: string; priority: number }[];
}

export interface Association {
  component: string;
  priority: number;
  use_oscilloscope?: boolean | null;
}

export interface ComponentForm {
  name: string;
  use_oscilloscope: boolean;
  affected_by: string[];
  contained_in?: string | null;
}

export interface FaultContextForm {
  dtc_code: string;
  condition_text: string;
  symptoms: string[];
  associations: Association[];
}

export interface ComponentSetForm {
  name: string;
  members: string[];
  verified_by: string;
}

export interface ModelInfo {
  model_id: string;
  input_length: number;
}

export interface HeatmapPayload {
  id: string;
  method: string;
  values: number[];
}

export interface ComponentResult {
  component: string;
  anomaly: boolean;
  method: "oscillogram" | "manual";
  classification_id: string;
  uncertainty: number | null;
  heatmap_id: string | null;
}

export interface FaultPath {
  components: string[];
  cycle: boolean;
  id: string;
}

export interface Report {
  vin: string;
  dtcs: string[];
  results: ComponentResult[];
  anomalous: string[];
  fault_paths: FaultPath[];
  sensor_hypothesis: boolean;
  warnings: string[];
  log_id: string | null;
}

/** What the session is waiting for; null once the run is finished. */
export type Awaiting = "dtcs" | "oscillogram" | "manual" | null;

export interface SessionPayload {
  session_id: string;
  state: string;
  awaiting: Awaiting;
  current_component: string | null;
  report: Report;
}
