// Secondary reaction task: tap the highlighted cell. Keeps the participant
// busy between alerts; pauses whenever an alert banner is active. Scores
// and per-stimulus latencies stay local until attached to a response.

export interface TaskStats {
  score: number;
  latencies_ms: number[];
}

export class SecondaryTask {
  readonly stats: TaskStats = { score: 0, latencies_ms: [] };
  private cells: HTMLButtonElement[] = [];
  private active = -1;
  private shownAt = 0;
  private timer: ReturnType<typeof setInterval> | null = null;
  private paused = false;

  constructor(private root: HTMLElement,
              private intervalMs = 1800,
              private rng: () => number = Math.random) {}

  mount(): void {
    this.root.classList.add("task-grid");
    for (let i = 0; i < 9; i++) {
      const cell = document.createElement("button");
      cell.className = "task-cell";
      cell.addEventListener("click", () => this.hit(i));
      this.cells.push(cell);
      this.root.appendChild(cell);
    }
    this.timer = setInterval(() => this.nextStimulus(), this.intervalMs);
  }

  setPaused(paused: boolean): void {
    this.paused = paused;
    this.root.classList.toggle("task-paused", paused);
    if (paused) this.clearStimulus();
  }

  private nextStimulus(): void {
    if (this.paused) return;
    this.clearStimulus();
    this.active = Math.floor(this.rng() * this.cells.length);
    this.shownAt = performance.now();
    this.cells[this.active].classList.add("task-lit");
  }

  private clearStimulus(): void {
    if (this.active >= 0) this.cells[this.active].classList.remove("task-lit");
    this.active = -1;
  }

  private hit(index: number): void {
    if (this.paused || index !== this.active) return;
    this.stats.score += 1;
    this.stats.latencies_ms.push(Math.round(performance.now() - this.shownAt));
    this.clearStimulus();
  }

  dispose(): void {
    if (this.timer) clearInterval(this.timer);
  }
}
