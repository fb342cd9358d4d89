// Bounded retention for stream-fed series so long runs stay responsive.

export class RingBuffer<T> {
  private items: T[] = [];

  constructor(readonly capacity: number = 10000) {}

  push(item: T): void {
    this.items.push(item);
    if (this.items.length > this.capacity) {
      this.items.splice(0, this.items.length - this.capacity);
    }
  }

  values(): readonly T[] {
    return this.items;
  }

  get length(): number {
    return this.items.length;
  }

  last(): T | undefined {
    return this.items[this.items.length - 1];
  }

  filter(predicate: (item: T) => boolean): T[] {
    return this.items.filter(predicate);
  }

  clear(): void {
    this.items = [];
  }
}
